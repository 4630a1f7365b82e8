import csv
import io
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from ctinf.baselines import greedy_degree
from ctinf.cli import allocation_csv, build_problem, main
from ctinf.instance import parse_instance, read_instance
from ctinf.errors import ValidationError
from ctinf.netmodel import read_network

TOY = Path(__file__).parent / "data" / "toy"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_power_10(tmp_path, capsys):
    out = tmp_path / "net.txt"
    code, _, _ = run(capsys, "generate", "--preset", "core-periphery", "--power", 10, "--laws", "weibull", "--seed", 7, "--output", out)
    assert code == 0
    assert read_network(out).num_nodes == 1024


def test_generate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        run(capsys, "generate", "--base", 0.8, 0.4, 0.4, 0.2, "--power", 6, "--seed", 3, "--output", path)
    assert a.read_bytes() == b.read_bytes()


def test_generate_random_preset_edge_count(capsys):
    # 56 off-diagonal pairs, each present with probability 1/8
    mean, sd = 56 / 8, math.sqrt(56 * (1 / 8) * (7 / 8))
    for seed in range(20):
        code, out, _ = run(capsys, "generate", "--preset", "random", "--power", 3, "--seed", seed)
        edges = int(out.split()[1].split("=")[1])
        assert abs(edges - mean) <= 3 * sd


def test_generate_errors(tmp_path, capsys):
    code, _, err = run(capsys, "generate", "--preset", "random", "--power", 25, "--seed", 1)
    assert code == 3 and "power" in err
    code, _, err = run(capsys, "generate", "--preset", "random", "--power", 2, "--seed", 1, "--output", tmp_path / "no" / "x.txt")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--preset", "nonsense", "--power", "2", "--seed", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--preset", "random", "--power", "2"])
    assert exc.value.code == 2


def test_estimate_outputs(capsys):
    net = TOY / "net.txt"
    code, out, _ = run(capsys, "estimate", "--network", net, "--sources", "", "--T", 1, "--seed", 1, "-n", 50)
    assert code == 0 and out.startswith("value=0 stderr=0")
    code, out, _ = run(capsys, "estimate", "--network", net, "--sources", "0,3", "--t-grid", "0.1:10:20", "--seed", 1, "-n", 50)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 20
    values = [float(r["value"]) for r in rows]
    assert values == sorted(values)
    code, ns_out, _ = run(capsys, "estimate", "--network", net, "--sources", "0,3", "--t-grid", "0.1:10:20", "--seed", 1, "-n", 50, "--method", "ns")
    assert code == 0 and len(list(csv.DictReader(io.StringIO(ns_out)))) == 20


def test_estimate_workers_and_errors(capsys):
    net = TOY / "net.txt"
    args = ["estimate", "--network", net, "--sources", "0", "--T", 3, "--seed", 5, "-n", 600]
    _, one, _ = run(capsys, *args)
    _, two, _ = run(capsys, *args, "--workers", 2)
    assert one == two
    code, _, err = run(capsys, "estimate", "--network", net, "--sources", "99", "--T", 1, "--seed", 1)
    assert code == 2
    code, _, _ = run(capsys, "estimate", "--network", net, "--sources", "0", "--seed", 1)
    assert code == 2
    with pytest.raises(SystemExit):
        main(["estimate", "--network", str(net), "--T", "1", "--seed", "1"])


@pytest.mark.parametrize("name", ["uniform", "budgeted"])
def test_maximize_golden(name, capsys):
    code, out, err = run(capsys, "maximize", "--instance", TOY / f"{name}.txt", "--seed", 3, "-n", 100)
    assert code == 0
    assert out == (TOY / f"golden_{name}.csv").read_text()
    assert "value=" in err and "k_a=" in err and "rho=" in err and "delta=" in err


def test_maximize_uniform_flag_conflict(capsys):
    code, _, err = run(capsys, "maximize", "--instance", TOY / "budgeted.txt", "--seed", 3, "-n", 20, "--uniform")
    assert code == 3 and "--uniform" in err and "cost" in err


def test_maximize_baseline_dispatch(capsys):
    code, out, _ = run(capsys, "maximize", "--instance", TOY / "uniform.txt", "--seed", 3, "-n", 100, "--baseline", "degree")
    problem = build_problem(read_instance(TOY / "uniform.txt"), 100, 5, 3, 0.1)
    assert code == 0 and out == allocation_csv(problem, greedy_degree(problem, "degree"))


def test_maximize_inconsistent_networks(tmp_path, capsys):
    shutil.copy(TOY / "net.txt", tmp_path / "a.txt")
    (tmp_path / "b.txt").write_text("nodes=3 edges=1\n0 1 exponential 1 0\n")
    inst = tmp_path / "inst.txt"
    inst.write_text(
        "products=2 users=2\n"
        "product 0 budget 1 weight 1 network a.txt horizon 1\n"
        "product 1 budget 1 weight 1 network b.txt horizon 1\n"
    )
    code, _, err = run(capsys, "maximize", "--instance", inst, "--seed", 1)
    assert code == 2 and "differing node counts" in err


def test_instance_parse_errors(tmp_path):
    with pytest.raises(ValidationError, match="header"):
        parse_instance("products=2\n", tmp_path)
    with pytest.raises(ValidationError, match=":2:"):
        parse_instance("products=1 users=1\nproduct 0 budget 1\n", tmp_path)
    with pytest.raises(ValidationError, match=":2: malformed"):
        parse_instance("products=1 users=1\ncapacity default x\n", tmp_path)
    with pytest.raises(ValidationError, match="unrecognized"):
        parse_instance("products=1 users=1\nbogus line\n", tmp_path)


def test_instance_constraints():
    inst = read_instance(TOY / "uniform.txt")
    system = inst.constraint_system()
    assert system.P == 3 and system.knapsacks is None
    assert system.matroids[2].capacity.tolist() == [2, 3]
    budgeted = read_instance(TOY / "budgeted.txt").constraint_system()
    assert budgeted.k == 2
    # node 7 costs 2.5 against a budget of 2 for product 0
    assert budgeted.knapsacks.excluded[inst.ground.element(0, 2)]


def test_benchmark(capsys):
    code, out, _ = run(capsys, "benchmark", "--sizes", 64, "--edge-factors", 2, "--seed", 1, "-n", 10)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1
    code, out, _ = run(capsys, "benchmark", "--sizes", "128,64", "--edge-factors", "4,2", "--seed", 1, "-n", 10, "--products", 2, "--targets", 8)
    rows = list(csv.DictReader(io.StringIO(out)))
    keys = [(int(r["nodes"]), int(r["edges"])) for r in rows]
    assert keys == sorted(keys) and len(keys) == 4
    assert all(float(r["maximize_value"]) > 0 for r in rows)
