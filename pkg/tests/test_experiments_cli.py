import json
import math

import numpy as np
import pytest

from hsbandit.baselines import exp3_tuning
from hsbandit.cli import main
from hsbandit.environments import (
    SinusoidalBernoulliEnv,
    make_logged_stream,
    write_logged_csv,
)
from hsbandit.errors import ConfigError
from hsbandit.experiments import (
    EcocConfig,
    EnvConfig,
    ExperimentConfig,
    ReplayConfig,
    StructureConfig,
    _apply_override,
    build_algorithm,
    build_grid,
    build_structure,
    dump_structure,
    resolve_eta,
    run_ecoc,
    run_replay,
    run_synthetic,
)
from hsbandit.hsb import optimal_eta


def make_config(**kwargs):
    base = dict(
        algorithm="hsb-bt",
        arms=3,
        structure=StructureConfig(depth=2),
        env=EnvConfig(horizon=300),
        datasets=2,
        presentations=2,
    )
    base.update(kwargs)
    return ExperimentConfig(**base)


class TestConfig:
    def test_defaults_and_seed_fill(self):
        config = make_config()
        assert config.dataset_seeds == [101, 102]
        assert config.algorithm_seeds == [201, 202]
        assert config.eta == "auto"

    def test_from_dict_round_trip(self):
        config = make_config(eta=0.05, output_dir="x")
        clone = ExperimentConfig.from_dict(config.to_dict())
        assert clone == config

    def test_unknown_root_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_unknown_section_key_names_the_path(self):
        with pytest.raises(ConfigError, match="env"):
            ExperimentConfig.from_dict({"env": {"horizonn": 10}})

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(algorithm="nope"),
            dict(arms=1),
            dict(eta="sometimes"),
            dict(eta=-0.1),
            dict(regions=0),
            dict(datasets=0),
            dict(jobs=0),
            dict(env=EnvConfig(model="drifting")),
            dict(env=EnvConfig(horizon=0)),
            dict(dataset_seeds=[1]),
            dict(algorithm_seeds=[1, -2]),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ConfigError):
            make_config(**kwargs)

    def test_from_file_with_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "algorithm": "hsb-bt",
            "structure": {"depth": 3},
            "env": {"horizon": 1000},
        }))
        config = ExperimentConfig.from_file(
            str(path), ["env.horizon=500", "eta=fair", "arms=3"]
        )
        assert config.env.horizon == 500
        assert config.eta == "fair"
        assert config.structure.depth == 3

    def test_bad_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_override_forms(self):
        raw = {}
        _apply_override(raw, "env.horizon=250")
        _apply_override(raw, "algorithm=hsb-lg")
        assert raw == {"env": {"horizon": 250}, "algorithm": "hsb-lg"}
        with pytest.raises(ConfigError):
            _apply_override({}, "no-equals-sign")


class TestFactories:
    def test_cells_resolution(self):
        assert build_grid(make_config()).total_cells == 4
        config = make_config(structure=StructureConfig(cells=12))
        assert build_grid(config).total_cells == 12
        kary = make_config(
            algorithm="hsb-kary", structure=StructureConfig(depth=2, arity=3)
        )
        assert build_grid(kary).total_cells == 9

    def test_cells_resolution_errors(self):
        with pytest.raises(ConfigError):
            build_grid(make_config(structure=StructureConfig()))
        with pytest.raises(ConfigError):
            build_grid(make_config(algorithm="hsb-kary",
                                   structure=StructureConfig(cells=9)))
        with pytest.raises(ConfigError):
            build_grid(make_config(structure=StructureConfig(cells=12,
                                                             dims=2)))

    def test_structure_kinds(self):
        cases = {
            "hsb-bt": "binary-tree",
            "hsb-kary": "kary-tree",
            "hsb-lg": "lexicographic",
            "hsb-kgroup": "kgroup-lexicographic",
            "hsb-arb": "arbitrary-splitting",
            "hsb-aps": "arbitrary-position-splitting",
        }
        for algo, kind in cases.items():
            structure = StructureConfig(
                depth=2, arity=3 if algo == "hsb-kary" else 2
            )
            config = make_config(algorithm=algo, arms=2, structure=structure)
            assert build_structure(config).params.kind == kind
        with pytest.raises(ConfigError):
            build_structure(make_config(algorithm="exp3"))
        with pytest.raises(ConfigError):
            build_structure(make_config(
                algorithm="hsb-aps", structure=StructureConfig(cells=4)
            ))

    def test_resolve_eta_policies(self):
        config = make_config(eta=0.05)
        st = build_structure(config)
        assert resolve_eta(config, st, 1000) == 0.05

        auto = make_config(regions=3)
        st = build_structure(auto)
        expect = optimal_eta(st.psi, st.hs, st.params.a_r(3), 3, 1000)
        assert resolve_eta(auto, st, 1000) == expect

        fair = make_config(eta="fair")
        st = build_structure(fair)
        assert resolve_eta(fair, st, 1000) == exp3_tuning(3, 1000 / 4)[1]
        assert resolve_eta(fair, st, 2) == exp3_tuning(3, 1.0)[1]

    def test_build_algorithm_info(self):
        exp3_algo, info = build_algorithm(make_config(algorithm="exp3"), 500)
        assert info["eta"] == exp3_algo.eta

        _, info = build_algorithm(make_config(algorithm="sexp3"), 500)
        assert info["cells"] == 4
        assert info["eta"] == exp3_tuning(3, 500 / 4)[1]

        _, info = build_algorithm(
            make_config(algorithm="exp4-flat", arms=2), 500
        )
        assert info["experts"] == 16  # 2 arms ** 4 cells

        learner, info = build_algorithm(make_config(), 500)
        assert info["kind"] == "binary-tree"
        assert info["psi"] == 2 and info["hs"] == 1
        assert info["a_r"] == 2  # (regions-1) * depth
        assert learner.eta == info["eta"]

    def test_exp4_flat_rejects_fair_eta(self):
        with pytest.raises(ConfigError):
            build_algorithm(
                make_config(algorithm="exp4-flat", arms=2, eta="fair"), 500
            )

    def test_hamming_has_no_bandit(self):
        with pytest.raises(ConfigError):
            build_algorithm(make_config(algorithm="hamming"), 500)


class TestSynthetic:
    def test_outputs_and_accounting(self, tmp_path):
        config = make_config(output_dir=str(tmp_path / "out"))
        summary = run_synthetic(config)
        report = summary["report"]
        assert report["runs"] == 4
        assert len(summary["runs"]) == 4
        for row in summary["runs"]:
            assert math.isclose(
                row["regret"], row["total_loss"] - row["best_mapping_loss"]
            )
        assert report["bound_ok"] is not None
        assert report["eta"] > 0

        out = tmp_path / "out"
        assert (out / "summary.json").is_file()
        curve_lines = (out / "curve.csv").read_text().splitlines()
        assert len(curve_lines) == 301
        assert curve_lines[0] == "t,avg_accumulated_loss"
        assert float(curve_lines[-1].split(",")[1]) == pytest.approx(
            report["final_average_loss"]
        )
        for d in range(2):
            for p in range(2):
                rec = out / f"records_d{d}_p{p}.csv"
                assert len(rec.read_text().splitlines()) == 301

    def test_contextfree_baseline_has_no_bound(self, tmp_path):
        config = make_config(
            algorithm="exp3", datasets=1, presentations=1,
            env=EnvConfig(horizon=100), output_dir=str(tmp_path / "out"),
        )
        report = run_synthetic(config)["report"]
        assert report["bound"] is None and report["bound_ok"] is None

    def test_exp4_flat_runs_through_fallback_driver(self, tmp_path):
        config = make_config(
            algorithm="exp4-flat", datasets=1, presentations=1,
            env=EnvConfig(horizon=150), output_dir=str(tmp_path / "out"),
        )
        summary = run_synthetic(config)
        assert summary["report"]["extras"]["experts"] == 81  # 3 ** 4

    def test_reruns_are_byte_identical(self, tmp_path):
        def run_into(name, jobs):
            config = make_config(
                env=EnvConfig(horizon=200), jobs=jobs,
                output_dir=str(tmp_path / name),
            )
            run_synthetic(config)
            files = {}
            for f in sorted((tmp_path / name).iterdir()):
                if f.name == "summary.json":
                    payload = json.loads(f.read_text())
                    # the echoed config records where and how wide the run
                    # was scheduled; results must not depend on either
                    payload["config"].pop("output_dir")
                    payload["config"].pop("jobs")
                    files[f.name] = json.dumps(payload, sort_keys=True)
                else:
                    files[f.name] = f.read_text()
            return files

        first = run_into("a", jobs=1)
        second = run_into("b", jobs=1)
        parallel = run_into("c", jobs=2)
        assert first == second
        assert first == parallel

    def test_disable_round_records(self, tmp_path):
        config = make_config(
            datasets=1, presentations=1, env=EnvConfig(horizon=100),
            write_round_records=False, output_dir=str(tmp_path / "out"),
        )
        summary = run_synthetic(config)
        names = {f.name for f in (tmp_path / "out").iterdir()}
        assert names == {"summary.json", "curve.csv"}
        assert summary["runs"][0]["records"] is None


class TestReplay:
    def write_log(self, tmp_path, horizon=400, seed=50):
        env = SinusoidalBernoulliEnv(horizon)
        rounds = make_logged_stream(env, np.random.default_rng(seed))
        path = tmp_path / "log.csv"
        write_logged_csv(rounds, path)
        return path

    def test_replay_summary(self, tmp_path):
        path = self.write_log(tmp_path)
        config = make_config(
            algorithm="sexp3", presentations=3, algorithm_seeds=[1, 2, 3],
            replay=ReplayConfig(log=str(path)),
            output_dir=str(tmp_path / "out"),
        )
        summary = run_replay(config)
        assert summary["log_rounds"] == 400
        assert len(summary["runs"]) == 3
        for row in summary["runs"]:
            # uniform logging matches about a third of the rounds
            assert 70 <= row["matched"] <= 200
            assert 0.0 <= row["click_rate"] <= 1.0
        assert summary["mean_click_rate"] is not None
        lines = (tmp_path / "out" / "replay.csv").read_text().splitlines()
        assert lines[0] == "algorithm_seed,matched,total_loss,click_rate"
        assert len(lines) == 4

    def test_missing_log_config(self, tmp_path):
        config = make_config(output_dir=str(tmp_path / "out"))
        with pytest.raises(ConfigError):
            run_replay(config)

    def test_contextual_replay_beats_contextfree(self, tmp_path):
        path = self.write_log(tmp_path, horizon=4000, seed=51)
        seeds = [61, 62, 63, 64, 65]
        hsb = make_config(
            algorithm="hsb-bt", structure=StructureConfig(depth=3),
            presentations=5, algorithm_seeds=seeds,
            replay=ReplayConfig(log=str(path)),
            output_dir=str(tmp_path / "hsb"),
        )
        flat = make_config(
            algorithm="exp3", presentations=5, algorithm_seeds=seeds,
            replay=ReplayConfig(log=str(path)),
            output_dir=str(tmp_path / "exp3"),
        )
        hsb_rate = run_replay(hsb)["mean_click_rate"]
        flat_rate = run_replay(flat)["mean_click_rate"]
        assert hsb_rate > flat_rate


class TestEcoc:
    def test_hamming_pipeline(self, tmp_path):
        config = make_config(
            algorithm="hamming",
            ecoc=EcocConfig(classes=3, features=4, samples=120, epochs=3),
            output_dir=str(tmp_path / "out"),
        )
        summary = run_ecoc(config)
        assert summary["samples"] == 120
        assert summary["epoch_size"] == 40
        assert len(summary["errors_per_epoch"]) == 3
        lines = (tmp_path / "out" / "ecoc_epochs.csv").read_text().splitlines()
        assert lines[0] == "epoch,errors,error_rate"
        assert len(lines) == 4

    def test_epochs_must_divide_samples(self, tmp_path):
        config = make_config(
            algorithm="hamming",
            ecoc=EcocConfig(classes=3, features=4, samples=100, epochs=3),
            output_dir=str(tmp_path / "out"),
        )
        with pytest.raises(ConfigError):
            run_ecoc(config)

    def test_arms_must_match_classes(self, tmp_path):
        config = make_config(
            algorithm="hamming", arms=4,
            ecoc=EcocConfig(classes=3, features=4, samples=120, epochs=3),
            output_dir=str(tmp_path / "out"),
        )
        with pytest.raises(ConfigError):
            run_ecoc(config)

    def test_gridded_algorithms_need_codeword_dims(self, tmp_path):
        config = make_config(
            algorithm="sexp3", structure=StructureConfig(depth=3, dims=1),
            ecoc=EcocConfig(classes=3, features=4, samples=120, epochs=3),
            output_dir=str(tmp_path / "out"),
        )
        with pytest.raises(ConfigError):
            run_ecoc(config)

    def test_bandit_over_codeword_contexts(self, tmp_path):
        config = make_config(
            algorithm="sexp3",
            structure=StructureConfig(cells=8, dims=3),
            ecoc=EcocConfig(classes=3, features=4, samples=240, epochs=2),
            output_dir=str(tmp_path / "out"),
        )
        summary = run_ecoc(config)
        assert summary["total_error_rate"] < 1.0

    def test_csv_dataset(self, tmp_path):
        data = tmp_path / "data.csv"
        rng = np.random.default_rng(3)
        rows = ["f_1,f_2,label"]
        for _ in range(60):
            label = int(rng.integers(2))
            x = rng.normal(size=2) + 4.0 * label
            rows.append(f"{float(x[0])!r},{float(x[1])!r},{label}")
        data.write_text("\n".join(rows) + "\n")
        config = make_config(
            algorithm="hamming", arms=2,
            ecoc=EcocConfig(epochs=3, dataset=str(data)),
            output_dir=str(tmp_path / "out"),
        )
        summary = run_ecoc(config)
        assert summary["samples"] == 60


class TestDumpStructure:
    def test_payload(self):
        config = make_config(
            algorithm="hsb-lg", structure=StructureConfig(cells=3)
        )
        payload = dump_structure(config)
        assert payload["kind"] == "lexicographic"
        assert payload["node_count"] == 6


class TestCli:
    def test_run_synthetic_smoke(self, tmp_path, capsys):
        rc = main([
            "run-synthetic", "--algorithm", "hsb-bt", "--depth", "2",
            "--horizon", "120", "--datasets", "1", "--presentations", "1",
            "--output-dir", str(tmp_path / "out"),
        ])
        assert rc == 0
        assert (tmp_path / "out" / "summary.json").is_file()
        text = capsys.readouterr().out
        assert "regret bound" in text

    def test_cli_runs_are_byte_identical(self, tmp_path):
        def run(name):
            rc = main([
                "run-synthetic", "--algorithm", "hsb-lg", "--cells", "3",
                "--horizon", "150", "--datasets", "1", "--presentations", "1",
                "--output-dir", str(tmp_path / name),
            ])
            assert rc == 0
            return (tmp_path / name / "records_d0_p0.csv").read_bytes()

        assert run("a") == run("b")

    def test_config_file_plus_flag_override(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({
            "algorithm": "hsb-bt",
            "structure": {"depth": 2},
            "env": {"horizon": 500},
            "write_round_records": False,
        }))
        rc = main([
            "run-synthetic", "--config", str(path), "--horizon", "100",
            "--output-dir", str(tmp_path / "out"),
        ])
        assert rc == 0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["config"]["env"]["horizon"] == 100

    def test_missing_log_is_a_clean_error(self, tmp_path, capsys):
        rc = main([
            "run-replay", "--algorithm", "exp3",
            "--log", str(tmp_path / "absent.csv"),
            "--output-dir", str(tmp_path / "out"),
        ])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_bad_override_is_a_clean_error(self, capsys):
        rc = main(["run-synthetic", "--set", "nonsense"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_algorithm_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["run-synthetic", "--algorithm", "mystery"])

    def test_dump_structure_stdout_and_file(self, tmp_path, capsys):
        rc = main(["dump-structure", "--algorithm", "hsb-lg", "--cells", "3"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["node_count"] == 6

        out = tmp_path / "structure.json"
        rc = main([
            "dump-structure", "--algorithm", "hsb-bt", "--depth", "2",
            "--out", str(out),
        ])
        assert rc == 0
        assert json.loads(out.read_text())["node_count"] == 7

    def test_verify_battery(self, capsys):
        rc = main(["verify"])
        out = capsys.readouterr().out
        assert rc == 0
        lines = [l for l in out.splitlines() if l]
        assert len(lines) == 6
        assert all(l.startswith("PASS") for l in lines)

    def test_verify_json_mode(self, capsys):
        rc = main(["verify", "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ok"] is True
        assert {c["name"] for c in payload["checks"]} == {
            "fresh-state-identities", "mixture-equivalence",
            "flat-mixture-regret-bound", "structured-regret-bound",
            "quantization-gaps", "kernel-generic-agreement",
        }
