import json

import pytest

from hisres.cli import main
from hisres.evaluation import validate_report
from hisres.synthetic import GeneratorSpec, generate

SMALL = ["--dim", "8", "--history-len", "3", "--layers", "1", "--channels", "4", "--epochs", "1"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    generate(GeneratorSpec(num_entities=9, num_relations=3, num_timestamps=16, period=3, facts_per_step=3,
                           noise=0.3, seed=4)).write(root / "ds")
    ckpt = root / "m.ckpt"
    assert main(["train", "--dataset-dir", str(root / "ds"), *SMALL, "--checkpoint", str(ckpt)]) == 0
    return root


def test_train_writes_metrics_and_figures(workspace, tmp_path):
    rep = tmp_path / "rep"
    code = main(["train", "--dataset-dir", str(workspace / "ds"), *SMALL, "--metrics-out", str(tmp_path / "m.json"),
                 "--report-dir", str(rep)])
    assert code == 0
    validate_report(json.loads((tmp_path / "m.json").read_text()))
    for name in ("losses.csv", "losses.png", "test_per_timestamp.csv", "test_per_timestamp.png"):
        assert (rep / name).stat().st_size > 0


def test_eval_matches_noise_zero(workspace, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["eval", "--dataset-dir", str(workspace / "ds"), "--checkpoint", str(workspace / "m.ckpt")]
    assert main([*args, "--metrics-out", str(a)]) == 0
    assert main([*args, "--metrics-out", str(b), "--noise-std", "0"]) == 0
    assert a.read_text() == b.read_text()


def test_baseline_needs_no_checkpoint(workspace, tmp_path):
    out = tmp_path / "b.json"
    assert main(["baseline", "--dataset-dir", str(workspace / "ds"), "--metrics-out", str(out)]) == 0
    validate_report(json.loads(out.read_text()))


def test_inspect_gates_rows(workspace, tmp_path):
    assert main(["inspect", "gates", "--dataset-dir", str(workspace / "ds"), "--checkpoint",
                 str(workspace / "m.ckpt"), "--report-dir", str(tmp_path)]) == 0
    (csv_path,) = tmp_path.glob("gates_recent_t*.csv")
    assert len(csv_path.read_text().strip().splitlines()) - 1 == 9
    assert list(tmp_path.glob("gates_t*.png"))


def test_inspect_attention_sums(workspace, tmp_path):
    assert main(["inspect", "attention", "--dataset-dir", str(workspace / "ds"), "--checkpoint",
                 str(workspace / "m.ckpt"), "--report-dir", str(tmp_path)]) == 0
    (csv_path,) = tmp_path.glob("attention_t*.csv")
    sums = {}
    for line in csv_path.read_text().strip().splitlines()[1:]:
        o, _, _, w = line.split(",")
        sums[o] = sums.get(o, 0.0) + float(w)
    assert sums and all(abs(v - 1) <= 1e-6 for v in sums.values())


def test_inspect_timings_untrained(workspace, tmp_path):
    assert main(["inspect", "timings", "--dataset-dir", str(workspace / "ds"), *SMALL,
                 "--report-dir", str(tmp_path)]) == 0
    rows = [line.split(",") for line in (tmp_path / "timings.csv").read_text().strip().splitlines()[1:]]
    pairs = [(m, p) for m, p, _ in rows]
    assert len(pairs) == len(set(pairs))
    assert {"training", "inference"} == {p for _, p in pairs}
    assert (tmp_path / "timings.png").exists()


def test_inspect_graph_untrained(workspace, tmp_path):
    assert main(["inspect", "graph", "--dataset-dir", str(workspace / "ds"), *SMALL, "--time", "10",
                 "--report-dir", str(tmp_path)]) == 0
    windows = (tmp_path / "windows_t10.tsv").read_text().splitlines()
    starts = {line.split("\t")[0] for line in windows[1:]}
    assert starts <= {"7", "8"}


def test_config_file_and_override(workspace, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# toy run\ndataset-dir = {workspace / 'ds'}\ndim = 8\nhistory_len = 3\nomega = 3\n"
                   "layers = 1\nchannels = 4\nepochs = 1\n")
    assert main(["train", "--config", str(cfg)]) == 0
    assert main(["train", "--config", str(cfg), "--omega", "4"]) == 2


@pytest.mark.parametrize("argv, code", [
    (["inspect", "bogus", "--dataset-dir", "x"], 2),
    (["train", "--epochs", "1"], 2),
    (["train", "--dataset-dir", "/nonexistent/ds"], 3),
    (["eval", "--dataset-dir", "/nonexistent/ds", "--checkpoint", "/nonexistent/m.ckpt"], 4),
    (["train", "--dataset-dir", "x", "--dim", "abc"], 2),
])
def test_exit_codes(argv, code):
    assert main(argv) == code


def test_checkpoint_for_other_dataset(workspace, tmp_path):
    generate(GeneratorSpec(num_entities=12, num_relations=3, num_timestamps=16, seed=1)).write(tmp_path / "other")
    assert main(["eval", "--dataset-dir", str(tmp_path / "other"), "--checkpoint", str(workspace / "m.ckpt")]) == 4


def test_generate(tmp_path):
    assert main(["generate", str(tmp_path / "g"), "--pattern", "chain", "--num-relations", "3", "--closure",
                 "--num-timestamps", "12"]) == 0
    assert (tmp_path / "g" / "queries.txt").exists()
