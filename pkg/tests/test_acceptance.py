"""Acceptance gate: one test and one printed PASS/FAIL line per criterion."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from vibsim import analysis, gm, model, trotter
from vibsim.encoding import EncodingScheme, decode_index, encode_state
from vibsim.model import Convention

from conftest import eig_for, encoded_block_elementwise, ordered_for, terms_for

CO2_DT = 0.01
H2O_DT = 0.53e-3
CO2_V0 = (1, 0)
H2O_V0 = (2, 0, 0)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, checks: list[tuple[str, bool | None]]):
        # passed=None marks an informational entry that does not gate the criterion
        ok = all(passed is not False for _, passed in checks)
        tag = {True: "ok", False: "MISS", None: "info"}
        detail = "; ".join(f"{tag[passed]} {text}" for text, passed in checks)
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        failed = [text for text, passed in checks if passed is False]
        assert not failed, f"criterion {number} failed: {failed}"
    return emit


def test_criterion_01_term_counts(report):
    expect = {("co2", "binary"): 25, ("co2", "qudit"): 26,
              ("h2o", "binary"): 79, ("h2o", "qudit"): 78, ("h2o", "direct"): 218}
    checks = []
    for (name, kind), n in expect.items():
        got = terms_for(name, kind).n_hq
        checks.append((f"{name} {kind} N_Hq={got} (want {n})", got == n))
    report(1, "term counts", checks)


def test_criterion_02_gate_counts(report):
    expect = {("co2", "binary"): 51, ("co2", "direct"): 200, ("co2", "qudit"): 15,
              ("h2o", "binary"): 198, ("h2o", "qudit"): 60}
    checks = []
    for (name, kind), n in expect.items():
        got = gm.two_site_gate_count(terms_for(name, kind))
        checks.append((f"{name} {kind} N2q={got} (want {n})", got == n))
    report(2, "two-site gate counts", checks)


def test_criterion_03_histograms(report):
    checks = []
    for name in ("co2", "h2o"):
        hist = terms_for(name, "qudit").histogram()
        high = sum(c for o, c in hist.items() if o >= 3)
        checks.append((f"{name} qudit terms with order>=3: {high}", high == 0))
        for kind in ("binary", "direct"):
            hist = terms_for(name, kind).histogram()
            checks.append((f"{name} {kind} order3={hist.get(3, 0)} order4={hist.get(4, 0)}",
                           hist.get(3, 0) > 0 and hist.get(4, 0) > 0))
    report(3, "operator-order histograms", checks)


def test_criterion_04_resources(report):
    checks = []
    for name, want in (("co2", (4, 8, 2)), ("h2o", (6, 12, 3))):
        m = model.preset(name).n_modes
        got = tuple(EncodingScheme(k, 3, m).n_sites for k in ("binary", "direct", "qudit"))
        checks.append((f"{name} sites {got} (want {want})", got == want))
    d = EncodingScheme("qudit", 3, 2).site_dim
    checks.append((f"qudit d={d}", d == 4))
    report(4, "site counts", checks)


def _fermi_gap(eig: model.EigenSystem) -> float:
    w = eig.vectors[eig.index((1, 0))] ** 2 + eig.vectors[eig.index((0, 2))] ** 2
    a, b = np.argsort(-w)[:2]
    return abs(eig.energies[a] - eig.energies[b])


def _table_matches(convention: Convention, table: dict) -> tuple[int, int, float, float]:
    eig = eig_for("h2o", 3, convention)
    labels = model.label_eigenstates(eig, model.h2o(), 0.2)
    bad, worst = 0, 0.0
    for n, sym, energy, configs in table["rows"]:
        lab = labels[n]
        got = {"".join(map(str, c)) for c, _ in lab.configs}
        want = {c for c, _ in configs}
        worst = max(worst, abs(lab.energy - energy))
        if abs(lab.energy - energy) > 0.05 or got != want or lab.symmetry != sym:
            bad += 1
    n_below = int(np.sum(eig.energies <= 13000.0))
    exc = eig.energies[1:5] - eig.energies[0]
    exc_dev = float(np.max(np.abs(exc - np.array(table["excitation_model"]))))
    return bad, n_below, worst, exc_dev


def test_criterion_05_spectroscopy(report, h2o_table):
    checks = []
    matched = []
    for conv in Convention:
        gap = _fermi_gap(eig_for("co2", 3, conv))
        bad, n_below, worst, exc_dev = _table_matches(conv, h2o_table)
        ok = abs(gap - 74.4) <= 0.1 and bad == 0 and n_below == 31 and exc_dev <= 0.05
        if ok:
            matched.append(conv.value)
        checks.append((f"{conv.value}: Fermi gap {gap:.3f}, {bad}/31 rows off (max dE {worst:.3f}), "
                       f"{n_below} levels <= 13000, excitation dev {exc_dev:.3f}", None))
    checks.append((f"matching convention(s): {matched or 'none'}", bool(matched)))
    report(5, "spectroscopy", checks)


def _max_dev(name, kind, v0, dt, n_steps):
    ordered = ordered_for(name, kind, dt)
    res = trotter.evolve(ordered, v0, dt, n_steps, 0.0)
    exact = model.exact_populations(eig_for(name), v0, v0, res.times)
    return float(np.max(np.abs(res.populations[v0] - exact)))


def test_criterion_06_trotter_accuracy(report):
    checks = []
    cases = [("co2", k, CO2_V0, CO2_DT, 1.0, 0.08) for k in ("binary", "direct", "qudit")]
    cases += [("h2o", k, H2O_V0, H2O_DT, 0.040, 0.06) for k in ("binary", "qudit")]
    for name, kind, v0, dt, horizon, bound in cases:
        dev = _max_dev(name, kind, v0, dt, int(round(horizon / dt)))
        if dev < bound:
            checks.append((f"{name} {kind} dev {dev:.4f} < {bound}", True))
            continue
        # ordering-independent fallback: halve dt over the same horizon
        half = _max_dev(name, kind, v0, dt / 2, int(round(2 * horizon / dt)))
        checks.append((f"{name} {kind} dev {dev:.4f} >= {bound}, at dt/2 {half:.4f}", half < bound))
    report(6, "Trotter accuracy", checks)


def test_criterion_07_decay(report):
    checks = []
    cases = [("co2", "binary", CO2_V0, CO2_DT, 1e-3, 100, 0.20, "ps"),
             ("co2", "direct", CO2_V0, CO2_DT, 1e-3, 100, 0.050, "ps"),
             ("co2", "qudit", CO2_V0, CO2_DT, 1e-3, 100, 0.67, "ps"),
             ("h2o", "binary", H2O_V0, H2O_DT, 1e-3, 76, 2.7e-3, "fs"),
             ("h2o", "qudit", H2O_V0, H2O_DT, 1e-3, 76, 8.8e-3, "fs"),
             ("h2o", "binary", H2O_V0, H2O_DT, 1e-5, 76, 270e-3, "fs"),
             ("h2o", "qudit", H2O_V0, H2O_DT, 1e-5, 76, 880e-3, "fs")]
    for name, kind, v0, dt, eps, n, quoted, unit in cases:
        res = trotter.evolve(ordered_for(name, kind, dt), v0, dt, n, eps)
        tau = analysis.fit_decay(res.times, res.populations[v0], res.ideal[v0], dim=res.dim)
        pred = trotter.predicted_decay_time(terms_for(name, kind), dt, eps)
        scale = 1e3 if unit == "fs" else 1.0
        ok = abs(tau / pred - 1) <= 0.05 and abs(tau / quoted - 1) <= 0.05
        checks.append((f"{name} {kind} eps={eps:g} fit {tau * scale:.4g} {unit}, "
                       f"predicted {pred * scale:.4g}, quoted {quoted * scale:g}", ok))
    report(7, "decay times", checks)


def test_criterion_08_equal_decay(report):
    n2q_binary = gm.two_site_gate_count(terms_for("co2", "binary"))
    n2q_qudit = gm.two_site_gate_count(terms_for("co2", "qudit"))
    eps = trotter.equal_decay_error(n2q_binary, n2q_qudit, 1e-3)
    rounded = float(f"{eps:.0e}")
    report(8, "equal-decay qudit error", [
        (f"(N2q {n2q_binary}/{n2q_qudit}) * 1e-3 = {eps:.4g}", abs(eps - 3.4e-3) < 1e-12),
        (f"one significant figure {rounded:g}", rounded == 3e-3),
    ])


def test_criterion_09_spectra(report):
    checks = []
    spectra = {}
    for kind in ("qudit", "direct"):
        res = trotter.evolve(ordered_for("co2", kind, CO2_DT), CO2_V0, CO2_DT, 100, 1e-3)
        spectra[kind] = analysis.dft_spectrum(res.times, res.populations[CO2_V0], 0.0, 200.0, 2001)
    qpeak = spectra["qudit"].peak()
    checks.append((f"CO2 qudit noisy peak {qpeak:.1f} (want 74.4 +- 2)", abs(qpeak - 74.4) <= 2.0))
    height = spectra["qudit"].scale
    maxima = analysis.local_maxima(spectra["direct"], 50.0, 100.0, raw=True)
    worst = max((a / height for _, a in maxima), default=0.0)
    checks.append((f"CO2 direct local maxima in 50-100 up to {worst:.2f} of qudit peak (want <= 0.3)",
                   worst <= 0.3))

    n = int(round(8.0 / H2O_DT))
    res = trotter.evolve(ordered_for("h2o", "qudit", H2O_DT), H2O_V0, H2O_DT, n, 1e-5)
    spec = analysis.dft_spectrum(res.times, res.populations[H2O_V0], 5150.0, 5250.0, 1001)
    # the resolved peak is the dominant local maximum of the window
    peak = spec.peak()
    checks.append((f"H2O qudit eps=1e-5 (8 ps) peak {peak:.1f} (want 5223.4 +- 5)",
                   abs(peak - 5223.4) <= 5.0))
    report(9, "noisy spectra", checks)


def test_criterion_10_properties(report, rng):
    checks = []

    bijective = True
    for kind, m, vmax in itertools.product(("binary", "direct", "qudit"), (1, 2, 3), range(1, 8)):
        scheme = EncodingScheme(kind, vmax, m)
        for v in itertools.product(range(vmax + 1), repeat=m):
            bijective &= decode_index(encode_state(v, scheme), scheme) == v
    checks.append(("encoder bijection M<=3, vmax<=7", bijective))

    gram_err = max(float(np.max(np.abs(np.einsum("aij,bji->ab", lam, lam) - 2 * np.eye(d * d))))
                   for d in range(2, 9) for lam in [gm.gell_mann_basis(d).matrices])
    checks.append((f"Gell-Mann orthonormality d<=8 err {gram_err:.1e}", gram_err < 1e-12))

    recon = spec_err = 0.0
    for name, vmax, kind in itertools.product(("co2", "h2o"), (1, 2, 3), ("binary", "direct", "qudit")):
        terms = terms_for(name, kind, vmax)
        block = encoded_block_elementwise(terms)
        full = model.build_full_hamiltonian(model.preset(name), vmax)
        recon = max(recon, float(np.max(np.abs(block - full))))
        spec_err = max(spec_err, float(np.max(np.abs(np.linalg.eigvalsh(block) - np.linalg.eigvalsh(full)))))
    checks.append((f"reconstruction err {recon:.1e}, spectrum err {spec_err:.1e} cm^-1",
                   recon < 1e-8 and spec_err < 1e-8))

    engine_err = trace_err = 0.0
    states = model.basis_states(2, 3)
    for kind in ("binary", "direct", "qudit"):
        ordered = ordered_for("co2", kind, CO2_DT)
        kw = dict(noise=1e-3, tracked=states, n_steps=10 if kind == "direct" else 30)
        sv = trotter.evolve(ordered, CO2_V0, CO2_DT, engine="statevector", **kw)
        dm = trotter.evolve(ordered, CO2_V0, CO2_DT, engine="density", **kw)
        engine_err = max(engine_err, max(float(np.max(np.abs(sv.populations[v] - dm.populations[v])))
                                         for v in states))
        if kind != "direct":
            trace_err = max(trace_err, float(np.max(np.abs(sum(dm.populations.values()) - 1.0))))
    checks.append((f"engine equivalence {engine_err:.1e}", engine_err < 1e-12))
    checks.append((f"trace preservation {trace_err:.1e}", trace_err < 1e-12))

    monotone = True
    for name, kind in (("co2", "binary"), ("co2", "direct"), ("co2", "qudit"),
                       ("h2o", "binary"), ("h2o", "qudit")):
        ordered = ordered_for(name, kind, CO2_DT)
        initial = np.argsort(-ordered.scores, kind="stable")
        monotone &= ordered.st_error <= trotter.st_error(terms_for(name, kind), initial, CO2_DT) * (1 + 1e-12)
    checks.append(("ordering never raises eps_ST", monotone))

    terms = terms_for("co2", "binary")
    order = list(rng.permutation(len(terms.terms)))
    ratio = trotter.st_error(terms, order, 0.02) / trotter.st_error(terms, order, 0.01)
    checks.append((f"eps_ST(2dt)/eps_ST(dt) = {ratio:.12f}", abs(ratio - 4.0) < 1e-9))

    eig = eig_for("co2")
    ordered = ordered_for("co2", "qudit", CO2_DT)
    devs = []
    for dt in (0.01, 0.005, 0.0025):
        res = trotter.evolve(ordered, CO2_V0, dt, int(round(0.1 / dt)))
        exact = model.exact_populations(eig, CO2_V0, CO2_V0, res.times)
        devs.append(float(np.max(np.abs(res.populations[CO2_V0] - exact))))
    factors = [a / b for a, b in zip(devs, devs[1:])]
    checks.append((f"Trotter convergence factors {', '.join(f'{f:.2f}' for f in factors)}",
                   all(f >= 1.8 for f in factors)))
    report(10, "property suites", checks)
