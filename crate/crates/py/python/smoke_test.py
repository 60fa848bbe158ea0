"""Smoke test for the compiled module: python crates/py/python/smoke_test.py"""
from fractions import Fraction

import mlw


def main():
    assert mlw.tree_rank("graft(chain(2),T1)") == "w+2"
    assert mlw.well_founded("T1") and not mlw.well_founded("full")

    v = mlw.eval("N(depth=3,branch=3)", "d(x0,x0)", {0: "<>"})
    assert v == Fraction(0), v
    assert mlw.eval("N(depth=2,branch=2)", "d(x0,x1)", {0: "<0>", 1: "<1>"}) > 0

    text = mlw.build_model("N(depth=2,branch=2,h=1)")
    assert text.startswith("[sorts]"), text[:40]
    assert mlw.check_model("M(depth=3,branch=2)") == []

    real = mlw.realizers("M(depth=4,branch=3)", "sm:2", frag=4)
    assert real and all(len(t) == 1 for t in real), real

    found, why = mlw.isomorphism("N(depth=2,branch=2)", "N(depth=2,branch=2)")
    assert found is not None and why == "found"
    found, why = mlw.isomorphism("N(depth=2,branch=2)", "N(depth=2,branch=3)")
    assert found is None and why.startswith("refused"), why

    ok, transcript = mlw.forge("metric 0 1 2\nmetric 1 2 4\n", "N(depth=2,branch=2,h=1)")
    assert ok and "step 2" in transcript

    code, out, _ = mlw.cli(["tree", "rank", "--dsl", "T1"])
    assert (code, out) == (0, "w\n"), (code, out)
    code, _, err = mlw.cli(["nope"])
    assert code == 2 and err

    try:
        mlw.tree_rank("graft(")
    except ValueError:
        pass
    else:
        raise AssertionError("bad tree accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
