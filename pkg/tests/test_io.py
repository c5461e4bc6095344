"""Dataset parsing, synthesis, runfiles, result tables, and plot scripts."""

import math
import os

import numpy as np
import pytest

import curvesgd as cg
from curvesgd import dataio


# ---------------------------------------------------------------------------
# LIBSVM parsing

def test_parse_single_line():
    data = cg.parse_libsvm("+1 1:0.5 3:-2")
    assert data.dimension == 3
    assert np.array_equal(data.X, np.array([[0.5, 0.0, -2.0]]))
    assert np.array_equal(data.y, np.array([1.0]))


def test_parse_label_mapping():
    data = cg.parse_libsvm("2 1:1\n1 1:0\n")
    assert np.array_equal(data.y, np.array([-1.0, 1.0]))
    data2 = cg.parse_libsvm("-1 1:3\n+1 2:4\n1.0 1:1\n2.0 1:2\n")
    assert np.array_equal(data2.y, np.array([-1.0, 1.0, 1.0, -1.0]))


def test_parse_sparse_fill_and_dimension():
    text = "1 2:7\n-1 1:1 4:2\n"
    data = cg.parse_libsvm(text)
    assert data.dimension == 4
    assert np.array_equal(data.X, np.array([
        [0.0, 7.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 2.0],
    ]))


def test_parse_accepts_line_iterables():
    lines = ["1 1:1", "2 1:2"]
    a = cg.parse_libsvm(lines)
    b = cg.parse_libsvm("\n".join(lines))
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.y, b.y)


def test_parse_rejects_unmappable_label():
    with pytest.raises(ValueError) as err:
        cg.parse_libsvm("1 1:1\n3 1:2\n")
    assert "line 2" in str(err.value)
    assert "unmappable label" in str(err.value)


def test_parse_rejects_bad_indices():
    with pytest.raises(ValueError) as err:
        cg.parse_libsvm("1 0:5")
    assert "line 1" in str(err.value)
    with pytest.raises(ValueError) as err:
        cg.parse_libsvm("1 1:1 1:2")
    assert "line 1" in str(err.value)
    with pytest.raises(ValueError):
        cg.parse_libsvm("1 2:1 1:2")  # decreasing


def test_parse_rejects_malformed_pairs():
    with pytest.raises(ValueError):
        cg.parse_libsvm("1 1:x")
    with pytest.raises(ValueError):
        cg.parse_libsvm("1 novalue")


def test_parse_empty_input():
    for text in ("", "   \n\n"):
        with pytest.raises(ValueError) as err:
            cg.parse_libsvm(text)
        assert "empty dataset" in str(err.value)


# ---------------------------------------------------------------------------
# synthetic datasets

def test_synthesize_deterministic():
    a = cg.synthesize_dataset(30, 4, 7, "blobs")
    b = cg.synthesize_dataset(30, 4, 7, "blobs")
    c = cg.synthesize_dataset(30, 4, 8, "blobs")
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)


def test_synthesize_blobs_separable_when_far_apart():
    data = cg.synthesize_dataset(1000, 5, 0, "blobs", separation=10.0)
    assert set(np.unique(data.y)) == {-1.0, 1.0}
    obj = cg.LogisticObjective(data, "norm2_squared", 1e-3)
    ref = cg.solve_reference(obj)
    predicted = np.sign(data.X @ ref.w_star)
    accuracy = float(np.mean(predicted == data.y))
    assert accuracy >= 0.99


def test_synthesize_linear_recovery():
    data = cg.synthesize_dataset(50, 5, 3, "linear")
    assert data.planted_weights is not None
    obj = cg.LeastSquaresObjective(data)
    ref = cg.solve_reference(obj)
    assert np.max(np.abs(ref.w_star - data.planted_weights)) <= 1e-8


def test_synthesize_validates_sizes_and_kind():
    with pytest.raises(ValueError):
        cg.synthesize_dataset(1, 3, 0, "blobs")
    with pytest.raises(ValueError):
        cg.synthesize_dataset(10, 0, 0, "blobs")
    with pytest.raises(ValueError):
        cg.synthesize_dataset(10, 3, 0, "spirals")


def test_load_dataset_synth_spec():
    data = dataio.load_dataset("synth:blobs,n=40,d=3,seed=5")
    assert data.X.shape == (40, 3)
    with pytest.raises(ValueError):
        dataio.load_dataset("synth:blobs,n=40")  # missing required fields


# ---------------------------------------------------------------------------
# runfiles

RUNFILE_TEXT = """
# demo runfile
dataset = synth:linear,n=20,d=3,seed=4
variant = norm2_squared
lambda = 0.5
schedule = const:0.01
seeds = 0,1,2
epochs = 2
stride = 1
out = demo.csv
"""


def test_parse_runfile_and_round_trip():
    cfg = cg.parse_runfile(RUNFILE_TEXT)
    assert cfg.dataset == "synth:linear,n=20,d=3,seed=4"
    assert cfg.variant == "norm2_squared"
    assert cfg.lam == 0.5
    assert cfg.seeds == (0, 1, 2)
    assert cfg.epochs == 2
    assert cfg.out == "demo.csv"
    assert cg.parse_runfile(cg.format_runfile(cfg)) == cfg


def test_parse_runfile_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ValueError) as err:
        cg.parse_runfile(RUNFILE_TEXT + "model = logistic\n")
    assert "model" in str(err.value)
    with pytest.raises(ValueError) as err:
        cg.parse_runfile(RUNFILE_TEXT + "epochs = 3\n")
    assert "duplicate" in str(err.value).lower()


def test_parse_runfile_requires_core_keys():
    with pytest.raises(ValueError) as err:
        cg.parse_runfile("dataset = synth:blobs,n=10,d=2,seed=0\n")
    msg = str(err.value)
    assert "schedule" in msg or "missing" in msg


def test_parse_runfile_rejects_bad_variant_and_schedule():
    with pytest.raises(ValueError):
        cg.parse_runfile(RUNFILE_TEXT.replace("norm2_squared", "lasso"))
    with pytest.raises(ValueError):
        cg.parse_runfile(RUNFILE_TEXT.replace("const:0.01", "warp:9"))


def test_schedule_list_splits_on_semicolons():
    cfg = cg.parse_runfile(RUNFILE_TEXT.replace(
        "const:0.01", "const:0.01; power:scale=0.1,h=0.5"))
    entries = cfg.schedule_list()
    assert len(entries) == 2
    assert cg.parse_schedule(entries[0]).kind == "constant"
    assert cg.parse_schedule(entries[1]).kind == "power_law"


def test_build_objective_infers_loss_from_labels():
    cfg = cg.parse_runfile(RUNFILE_TEXT)
    obj, data = dataio.build_objective(cfg)
    assert isinstance(obj, cg.LeastSquaresObjective)
    assert data.size == 20
    blob_cfg = cg.parse_runfile(RUNFILE_TEXT.replace(
        "synth:linear,n=20,d=3,seed=4", "synth:blobs,n=20,d=3,seed=4"))
    obj2, _ = dataio.build_objective(blob_cfg)
    assert isinstance(obj2, cg.LogisticObjective)
    assert obj2.regularization_weight == 0.5


# ---------------------------------------------------------------------------
# result tables

def small_sweep(with_reference=True):
    obj = cg.QuadraticMeanObjective(1.0, np.array([[1.0], [-1.0]]))
    ref = cg.solve_reference(obj) if with_reference else None
    cfg = cg.RunConfig(objective=obj, schedule=cg.ScheduleSpec.constant(0.1),
                       seed=0, iterations=6, record_stride=2, reference=ref)
    return cg.multi_seed_sweep(cfg, seeds=(0, 1))


def test_write_read_round_trip(tmp_path):
    sweep = small_sweep()
    path = str(tmp_path / "out.csv")
    table = cg.write_results(sweep, path)
    back = cg.read_results(path)
    assert back.header == dataio.RESULT_HEADER
    assert back.rows == table.rows
    # every float column survives the trip bit for bit
    for col in ("t", "eta", "F", "E", "Y", "smoothed_F"):
        assert np.array_equal(back.column(col), table.column(col))
    # run id defaults to the file stem
    assert set(back.text_column("run")) == {"out"}
    # two seeds, four records each
    assert len(back.rows) == 8


def test_rows_without_reference_leave_gap_columns_empty(tmp_path):
    sweep = small_sweep(with_reference=False)
    path = str(tmp_path / "plain.csv")
    table = cg.write_results(sweep, path)
    assert all(cell == "" for cell in table.text_column("E"))
    assert all(cell == "" for cell in table.text_column("Y"))
    assert np.all(np.isnan(table.column("E")))
    f_col = table.column("F")
    assert np.all(np.isfinite(f_col))


def test_smoothed_column_is_trailing_mean_per_seed():
    sweep = small_sweep()
    rows = dataio.results_rows(sweep, "demo")
    per_seed = [r for r in rows if r[1] == "0"]
    f_vals = np.array([float(r[5]) for r in per_seed])
    smoothed = np.array([float(r[8]) for r in per_seed])
    assert np.allclose(smoothed, cg.moving_mean(f_vals, 3), rtol=1e-12)


def test_epoch_column_scales_by_component_count():
    sweep = small_sweep()
    rows = dataio.results_rows(sweep, "demo")
    # two components: epoch = t / 2
    epochs = [float(r[2]) for r in rows if r[1] == "0"]
    ts = [int(r[3]) for r in rows if r[1] == "0"]
    assert epochs == [t / 2.0 for t in ts]


def test_read_results_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError) as err:
        cg.read_results(str(path))
    assert "header" in str(err.value)


def test_result_table_unknown_column():
    sweep = small_sweep()
    rows = dataio.results_rows(sweep, "demo")
    table = dataio.ResultTable(dataio.RESULT_HEADER, rows)
    with pytest.raises(KeyError):
        table.column("loss")


# ---------------------------------------------------------------------------
# plot scripts

def test_emit_plot_script_lists_every_curve(tmp_path):
    paths = [str(tmp_path / ("run_%d.csv" % k)) for k in range(5)]
    script_path = str(tmp_path / "plot.gp")
    text = cg.emit_plot_script(paths, script_path)
    assert text.count("using") == 5
    assert "smooth unique" in text
    assert "logscale y" in text
    # paths inside the script are relative to the script location
    assert str(tmp_path) not in text
    for k in range(5):
        assert "run_%d.csv" % k in text
    assert os.path.exists(script_path)


def test_emit_plot_script_requires_curves(tmp_path):
    with pytest.raises(ValueError):
        cg.emit_plot_script([], str(tmp_path / "plot.gp"))


def test_emit_plot_script_column_indices(tmp_path):
    text = cg.emit_plot_script([str(tmp_path / "a.csv")], str(tmp_path / "p.gp"))
    epoch_col = dataio.RESULT_HEADER.index("epoch") + 1
    f_col = dataio.RESULT_HEADER.index("F") + 1
    assert "using %d:%d" % (epoch_col, f_col) in text


# ---------------------------------------------------------------------------
# runfile execution

def test_execute_runfile_single_schedule(tmp_path):
    cfg = cg.parse_runfile(RUNFILE_TEXT)
    written, plot = cg.execute_runfile(cfg, base_dir=str(tmp_path))
    assert plot is None
    assert [os.path.basename(p) for p in written] == ["demo.csv"]
    table = cg.read_results(written[0])
    # 3 seeds, 2 epochs of 20 examples, stride 1: 41 records per seed
    assert len(table.rows) == 3 * 41
    # norm2_squared on least squares pins a strongly convex reference
    assert all(cell != "" for cell in table.text_column("E"))


def test_execute_runfile_multi_schedule_names_and_plot(tmp_path):
    text = RUNFILE_TEXT.replace("const:0.01",
                                "const:0.01; const:0.005")
    cfg = cg.parse_runfile(text)
    written, plot = cg.execute_runfile(cfg, base_dir=str(tmp_path))
    names = [os.path.basename(p) for p in written]
    assert names == ["demo_1.csv", "demo_2.csv"]
    assert plot is not None and plot.endswith("demo.gp")
    assert os.path.exists(plot)
    ids = {cg.read_results(p).text_column("run")[0] for p in written}
    assert ids == {"demo_1", "demo_2"}


def test_execute_runfile_reruns_identically(tmp_path):
    cfg = cg.parse_runfile(RUNFILE_TEXT)
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    dir_a.mkdir()
    dir_b.mkdir()
    first, _ = cg.execute_runfile(cfg, base_dir=str(dir_a))
    second, _ = cg.execute_runfile(cfg, base_dir=str(dir_b))
    with open(first[0], "rb") as fa, open(second[0], "rb") as fb:
        assert fa.read() == fb.read()
