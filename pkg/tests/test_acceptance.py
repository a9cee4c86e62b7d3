"""The seven acceptance criteria, each at its stated tolerance and time budget."""

import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from qselberg import verify
from qselberg.qcore import sample_generic


def record(number, title, reports, elapsed, budget=None):
    failed = [r for r in reports if not r.passed]
    worst = max((r.relative_residual / r.tolerance for r in reports if r.tolerance), default=0.0)
    in_time = budget is None or elapsed < budget
    ok = bool(reports) and not failed and in_time
    limit = f" (budget {budget:g} s)" if budget is not None else ""
    line = (f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}: {len(reports) - len(failed)}/{len(reports)} "
            f"checks, worst residual/tolerance {worst:.2e}, {elapsed:.2f} s{limit}")
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert reports, "no checks ran"
    assert not failed, [(r.identity_id, r.relative_residual) for r in failed[:5]]
    assert in_time, f"took {elapsed:.2f} s"


def test_1_gauss_decompositions_agree():
    t0 = time.perf_counter()
    reports = []
    for seed in range(100):
        for n in range(1, 9):
            rng = np.random.default_rng([seed, n, 1])
            reports += verify.verify_decompositions(sample_generic(rng, n))
            reports.append(verify.verify_classical_M(verify.sample_classical(rng, n)))
    record(1, "LDU = UDL for R, A and classical M, 100 seeds, n=1..8", reports, time.perf_counter() - t0, 10)


def test_2_factored_R_equals_direct():
    t0 = time.perf_counter()
    reports = [verify.verify_direct_R(sample_generic(np.random.default_rng([seed, n, 2]), n))
               for seed in range(20) for n in range(1, 6)]
    assert all(r.tolerance == 1e-9 for r in reports)
    record(2, "factored R = directly solved R, 20 seeds, n=1..5", reports, time.perf_counter() - t0, 30)


def test_3_inverses_and_determinants():
    t0 = time.perf_counter()
    reports = []
    for seed in range(5):
        for n in range(1, 9):
            p = sample_generic(np.random.default_rng([seed, n, 3]), n)
            reports += verify.verify_inverses(p) + verify.verify_determinants(p)
    ids = {r.identity_id for r in reports}
    assert {"matrix/R/times-inverse-udl", "matrix/A/upper-times-inverse", "matrix/A/udl-lower-times-inverse",
            "matrix/R/determinant", "matrix/A/determinant", "matrix/K1/determinant",
            "matrix/K2/determinant"} <= ids
    record(3, "inverses and determinants, 5 seeds, n=1..8", reports, time.perf_counter() - t0)


def _suite_reports(out):
    return [verify.IdentityReport.from_json(r) for r in out["reports"]]


def test_4_polynomial_identities():
    t0 = time.perf_counter()
    reports = _suite_reports(verify.run_suite("polynomials", seeds=3, seed=0))
    ids = {r.identity_id.split("/")[1] for r in reports}
    assert {"matsuo", "etilde", "lagrange", "transition", "nabla-factors", "nabla-expansion"} <= ids
    record(4, "polynomial identities, 3 seeds, n=1..4", reports, time.perf_counter() - t0, 60)


def test_5_jackson_integrals():
    t0 = time.perf_counter()
    reports = []
    for n, N in ((1, 60), (2, 40)):
        out = verify.run_suite(f"integrals-n{n}", seeds=1, seed=0)
        reports += _suite_reports(out)
        assert all(r["meta"]["N"] == N for r in out["reports"])
    kinds = {"/".join(r.identity_id.split("/")[:3]) for r in reports}
    assert {"integral/three-term/lower", "integral/three-term/upper", "integral/three-term/prime-upper",
            "integral/three-term/prime-lower", "integral/system/alpha-shift", "integral/system/pair1-shift",
            "integral/system/pair2-shift", "integral/nabla-vanishes/phi"} <= kinds
    assert all("decreasing" in r.meta for r in reports)
    record(5, "Jackson integral relations, n=1 (N=60) and n=2 (N=40)", reports, time.perf_counter() - t0, 300)


def test_6_classical_reduction():
    t0 = time.perf_counter()
    reports = [r for r in verify.verify_classical(np.random.default_rng([0, 4]), points=20, n_max=0)]
    points = {r.identity_id.rsplit("=", 1)[1] for r in reports}
    assert len(points) == 20
    record(6, "contiguous relations and n=1 forms, 20 points", reports, time.perf_counter() - t0, 1)


def test_7_deterministic_reports():
    t0 = time.perf_counter()
    reports = []
    for suite, kw in (("matrices", dict(n_max=3)), ("polynomials", dict(n_max=2)), ("integrals-n1", {}),
                      ("classical", {})):
        first = verify.dumps_report(verify.run_suite(suite, seeds=2, seed=7, **kw))
        again = verify.dumps_report(verify.run_suite(suite, seeds=2, seed=7, threads=2, **kw))
        p = sample_generic(np.random.default_rng(0), 1)
        reports.append(verify.make_report(f"determinism/{suite}", p, float(first != again), 1.0, 0.0, t0))
    record(7, "byte-identical reports on rerun", reports, time.perf_counter() - t0)
