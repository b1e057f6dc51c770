import json

import numpy as np
import pytest

from qamsdr import cli
from qamsdr.experiments import CSV_HEADER, SimConfig, near_boundary, records_to_csv, simulate
from qamsdr.model import complex_to_real, dump_instance, generate_instance
from qamsdr.relaxations import build, extract_point
from qamsdr.detectors import simple_rounding


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_simulate_csv_and_reproducible(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"q": 2, "m_tilde": 2, "n_tilde": 2, "snr_db_grid": [5, 15],
                                      "trials_per_snr": 6, "detectors": ["bc", "pi", "va", "zf", "sd"]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["simulate", "--config", cfg, "--seed", "3", "--out", str(a)], capsys)[0] == 0
    assert run(["simulate", "--config", cfg, "--seed", "3", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 2 * 5
    for line in lines[1:]:
        f = line.split(",")
        trials, errs, ser = int(f[2]), int(f[3]), float(f[5])
        assert ser == pytest.approx(errs / (trials * 2))


def test_simulate_columns_agree_16qam():
    cfg = SimConfig(q=2, snr_db_grid=[6, 12, 18], trials_per_snr=50, detectors=["bc", "pi", "va"], seed=1)
    recs = {(r.snr_db, r.detector): r for r in simulate(cfg)}
    for snr in cfg.snr_db_grid:
        errs = {recs[(snr, d)].symbol_errors for d in cfg.detectors}
        assert len(errs) == 1


def test_simulate_noiseless_has_no_errors():
    cfg = SimConfig(q=2, snr_db_grid=[float("inf")], trials_per_snr=5,
                    detectors=["bc", "pi", "va", "va1", "bc-rand"])
    for r in simulate(cfg):
        assert r.symbol_errors == 0


def test_simulate_parallel_matches_serial():
    base = dict(q=2, m_tilde=2, n_tilde=2, snr_db_grid=[8], trials_per_snr=6, detectors=["bc", "zf"])
    assert records_to_csv(simulate(SimConfig(**base))) == records_to_csv(simulate(SimConfig(**base, jobs=2)))


def test_config_errors(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", {"q": 2, "detectors": ["nope"]})
    code, _, err = run(["simulate", "--config", bad], capsys)
    assert code == 2 and "unknown detectors" in err
    code, _, _ = run(["simulate", "--config", write(tmp_path / "t.json", {"trials_per_snr": 0})], capsys)
    assert code == 2
    code, _, _ = run(["simulate", "--config", write(tmp_path / "k.json", {"colour": 1})], capsys)
    assert code == 2
    code, _, _ = run(["simulate", "--config", write(tmp_path / "p.json", {"q": 4, "detectors": ["pi"]})], capsys)
    assert code == 2


def test_verify_16_and_256(tmp_path, capsys):
    cfg = write(tmp_path / "v.json", {"count": 3, "q": 2, "n_tilde": [2, 3, 4], "snr_db": 10})
    code, out, _ = run(["verify", "--config", cfg], capsys)
    assert code == 0
    rep = json.loads(out)["instances"]
    assert len(rep) == 3
    for r in rep:
        assert len(r["conversions"]) == 6 and all(c["feasible"] for c in r["conversions"])
        assert max(r["gaps"].values()) <= 1e-5
    cfg = write(tmp_path / "w.json", {"count": 1, "q": 4, "n_tilde": 2})
    code, out, _ = run(["verify", "--config", cfg], capsys)
    r = json.loads(out)["instances"][0]
    assert code == 0 and r["unavailable"] == ["pi"] and set(r["values"]) == {"bc", "va"}


def test_verify_solver_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "v.json", {"count": 1, "q": 2, "n_tilde": 2})
    code, _, _ = run(["verify", "--config", cfg, "--tol-gap", "1e-30", "--tol-feas", "1e-30"], capsys)
    assert code == 3


def test_roots_report(capsys):
    code, out, _ = run(["roots", "--roots", "1,9,25,49", "--roots", "1,2,3,100", "--roots", "1,2,3,4"], capsys)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0].startswith("r1,r2,r3,r4")
    assert [r.split(",")[9] for r in rows[1:]] == ["true", "false", "true"]
    assert all(r.endswith("true") for r in rows[1:])
    code, _, _ = run(["roots", "--roots", "3,2,1,4"], capsys)
    assert code == 2


def test_solve_noiseless_file(tmp_path, capsys):
    path = tmp_path / "i.json"
    assert run(["generate", "--seed", "4", "--out", str(path)], capsys)[0] == 0
    code, out, _ = run(["solve", str(path), "--relaxation", "pi"], capsys)
    res = json.loads(out)
    assert code == 0 and res["s_hat"] == res["s_true"]


def test_solve_malformed_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "q": 2,\n  "h_real": [1,\n')
    code, _, err = run(["solve", str(path)], capsys)
    assert code == 2 and "line" in err


def test_solve_round_trip_matches_in_memory(tmp_path, capsys):
    ci = generate_instance(3, 3, 2, 12.0, 21)
    path = tmp_path / "i.json"
    path.write_text(dump_instance(ci))
    code, out, _ = run(["solve", str(path), "--relaxation", "bc"], capsys)
    inst = complex_to_real(ci)
    relax = build("bc", inst)
    sol = relax.solve()
    d = simple_rounding(extract_point(sol, relax), inst)
    res = json.loads(out)
    assert res["relaxation_value"] == sol.objective
    assert res["s_hat"] == d.s_hat.tolist() and res["objective"] == d.objective


def test_near_boundary():
    assert near_boundary(np.array([1.99995, 0.3]), 2)
    assert not near_boundary(np.array([1.5, -0.3]), 2)
