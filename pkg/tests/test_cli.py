import numpy as np
import pytest

from skymatch import cli
from skymatch.dataset import read_manifest


def run_cli(*args) -> int:
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    code = run_cli(
        "gen-synthetic", "--out", out, "--seed", 5, "--classes", 3, "--views", 3,
        "--warm-cool", 0.25, "--brightness", 0.25,
    )
    assert code == 0
    return out


class TestGenAndScan:
    def test_scan_matches_generated_manifest(self, data_dir, tmp_path, capsys):
        out = tmp_path / "scanned.tsv"
        assert run_cli("scan", "--root", data_dir, "--out", out) == 0
        scanned = read_manifest(out)
        generated = read_manifest(data_dir / "manifest.tsv")
        assert [r.path for r in scanned.records] == [r.path for r in generated.records]
        assert [r.view_index for r in scanned.records] == [
            r.view_index for r in generated.records
        ]

    def test_gen_reports_count(self, tmp_path, capsys):
        assert run_cli("gen-synthetic", "--out", tmp_path / "g", "--classes", 2, "--views", 2) == 0
        assert "6 images" in capsys.readouterr().out


class TestFullChain:
    def test_manual_chain_matches_ablate_row(self, data_dir, tmp_path, capsys):
        work = tmp_path / "work"
        manifest = data_dir / "manifest.tsv"
        # A then C+R, mirroring the ablation's C+R+A variant
        assert run_cli("style-align", "--manifest", manifest,
                       "--out-dir", work / "styled", "--jobs", 1) == 0
        assert run_cli("crop-rotate", "--manifest", work / "styled" / "manifest.tsv",
                       "--out-dir", work / "aligned", "--jobs", 1) == 0
        assert run_cli("extract", "--manifest", work / "aligned" / "manifest.tsv",
                       "--out-dir", work / "fmaps", "--seed", 0, "--jobs", 1) == 0
        assert run_cli("pool", "--manifest", work / "fmaps" / "manifest.tsv",
                       "--out-dir", work / "emb", "--strategy", "2x2",
                       "--mode", "concat", "--jobs", 1) == 0
        assert run_cli("index", "--manifest", work / "emb" / "manifest.tsv",
                       "--view", "satellite", "--out", work / "gallery.tsv") == 0
        assert run_cli("index", "--manifest", work / "emb" / "manifest.tsv",
                       "--view", "drone", "--out", work / "queries.tsv") == 0
        capsys.readouterr()
        assert run_cli("evaluate", "--gallery", work / "gallery.tsv",
                       "--queries", work / "queries.tsv", "--k", "1,5,10") == 0
        eval_out = capsys.readouterr().out
        header = eval_out.splitlines()[1].split()
        assert header == ["variant", "direction", "R@1", "R@5", "R@10",
                          "mAP", "queries", "skipped"]
        eval_row = eval_out.splitlines()[2].split()

        assert run_cli("ablate", "--data", data_dir, "--jobs", 1) == 0
        ablate_out = capsys.readouterr().out
        target = next(
            line.split() for line in ablate_out.splitlines()
            if line.startswith("C+R+A") and "drone->satellite" in line
        )
        # columns R@1 R@5 R@10 mAP must agree between the manual chain and ablate
        assert eval_row[2:6] == target[2:6]

    def test_query_ranks_matching_id_first(self, data_dir, tmp_path, capsys):
        work = tmp_path / "q"
        manifest = data_dir / "manifest.tsv"
        assert run_cli("extract", "--manifest", manifest,
                       "--out-dir", work / "fmaps", "--jobs", 1) == 0
        assert run_cli("pool", "--manifest", work / "fmaps" / "manifest.tsv",
                       "--out-dir", work / "emb", "--jobs", 1) == 0
        assert run_cli("index", "--manifest", work / "emb" / "manifest.tsv",
                       "--out", work / "all.tsv") == 0
        capsys.readouterr()
        query_file = work / "emb" / "satellite" / "0000" / "sat.fmap"
        assert run_cli("query", query_file, "--index", work / "all.tsv", "--top", 1) == 0
        line = capsys.readouterr().out.strip()
        qid, position, top_id, score = line.split("\t")
        assert top_id == "satellite/0000/sat"
        assert float(score) == pytest.approx(1.0, abs=1e-6)


class TestAblateCli:
    def test_byte_identical_reruns(self, data_dir, capsys):
        assert run_cli("ablate", "--data", data_dir, "--jobs", 2) == 0
        first = capsys.readouterr().out
        assert run_cli("ablate", "--data", data_dir, "--jobs", 2) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_records_flag(self, data_dir, capsys):
        assert run_cli("ablate", "--data", data_dir, "--jobs", 1, "--records") == 0
        out = capsys.readouterr().out
        assert "metric=R@1" in out and "variant=C+R+A" in out

    def test_config_file_respected_unless_overridden(self, data_dir, tmp_path, capsys):
        from skymatch.pipeline import PipelineConfig
        from skymatch.partition import parse_strategy

        cfg = PipelineConfig(strategy=parse_strategy("3x3"), ks=(1, 2))
        cfg_path = tmp_path / "cfg.json"
        cfg.save(cfg_path)
        assert run_cli("ablate", "--data", data_dir, "--config", cfg_path, "--jobs", 1) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == f"# config {cfg.fingerprint()}"
        assert "R@2" in out
        # an explicit flag beats the file
        assert run_cli("ablate", "--data", data_dir, "--config", cfg_path,
                       "--k", "1,3", "--jobs", 1) == 0
        out = capsys.readouterr().out
        assert "R@3" in out and out.splitlines()[0] != f"# config {cfg.fingerprint()}"


class TestErrors:
    def test_malformed_strategy_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("pool", "x.fmap", "--out-dir", "y", "--strategy", "3*3")
        assert exc.value.code == 2
        assert "3*3" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("polish")
        assert exc.value.code == 2

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code = run_cli("evaluate", "--gallery", tmp_path / "no.tsv",
                       "--queries", tmp_path / "no2.tsv")
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_manifest_with_heading_flag_conflict(self, data_dir, tmp_path, capsys):
        code = run_cli("crop-rotate", "--manifest", data_dir / "manifest.tsv",
                       "--out-dir", tmp_path / "x", "--heading-deg", 10)
        assert code == 1

    def test_no_inputs_is_error(self, tmp_path):
        assert run_cli("extract", "--out-dir", tmp_path / "o") == 1

    def test_bad_fill_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("crop-rotate", "a.png", "--out-dir", tmp_path, "--fill", "1,2")
        assert exc.value.code == 2


class TestSingleFileMode:
    def test_positional_crop_rotate(self, data_dir, tmp_path, capsys):
        src = data_dir / "drone" / "0000" / "drone_01.png"
        out_dir = tmp_path / "single"
        assert run_cli("crop-rotate", src, "--out-dir", out_dir,
                       "--heading-deg", 120.0, "--jobs", 1) == 0
        assert (out_dir / "drone_01.png").is_file()

    def test_positional_style_align_auto_target(self, data_dir, tmp_path, capsys):
        src = data_dir / "satellite" / "0000" / "sat.png"
        assert run_cli("style-align", src, "--out-dir", tmp_path / "s",
                       "--target", "auto", "--jobs", 1) == 0
        assert (tmp_path / "s" / "sat.png").is_file()
