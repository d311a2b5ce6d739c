"""Smoke test for the specfix Python extension.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python3 python/smoke_test.py
"""

import pathlib

import specfix

ROOT = pathlib.Path(__file__).resolve().parent.parent


def test_detect():
    out = specfix.detect("input i8 a, b; i8 c; c = a + b;", ranges="a=0..100,b=0..100")
    assert [f["kind"] for f in out["findings"]] == ["IO"], out
    clean = specfix.detect("input i8 a, b; i8 c; c = a + b;", ranges="a=0..50,b=0..50")
    assert clean["findings"] == [], clean


def test_prove():
    (tr,) = specfix.prove("input i8 x; while (x > 0) { x = x - 1; }")
    assert tr["answer"] == "TR", tr
    (nt,) = specfix.prove("input i8 x; while (x < 10) { x = x - 1; }")
    assert nt["answer"] == "NT", nt
    assert nt["witness"] == {"x": 0}, nt


def test_repair():
    out = specfix.repair(
        "input i8 x; while (x < 10) { x = x - 1; }",
        tests="in: x=0 ; out: x=10\nin: x=3 ; out: x=10\n",
    )
    assert out["kind"] == "termination", out
    assert "x = x + 1;" in out["fixed"], out["fixed"]
    io = specfix.repair("input i8 a, b, c; i8 e; e = a + b - c;", ranges="a=100..110,b=100..110,c=100..110")
    assert io["kind"] == "overflow", io
    assert "e = a - c + b;" in io["fixed"], io["fixed"]


def test_check_equiv():
    assert specfix.check_equiv("a + b - c", "a - c + b")["equivalent"]
    diff = specfix.check_equiv("a * b", "a + b")
    assert not diff["equivalent"] and "witness" in diff


def test_errors():
    try:
        specfix.detect("input i8 a; a = ;")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")


def test_corpus():
    report = specfix.corpus(str(ROOT / "crates/core/corpus/manifest.txt"), jobs="2")
    totals = report["body"]["totals"]
    assert totals["mismatch"] == 0 and totals["error"] == 0, totals


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
    print(f"specfix {specfix.__version__}: smoke test passed")
