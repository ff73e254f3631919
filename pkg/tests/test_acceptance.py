"""Acceptance criteria. Each test records one PASS/FAIL line shown in the terminal summary."""

import itertools
import json
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, random_epochs, random_recording

from rsvpipe import classifiers as clf
from rsvpipe import cli
from rsvpipe import evaluation as ev
from rsvpipe import io as rio
from rsvpipe.errors import FormatError
from rsvpipe.linalg import gen_eig
from rsvpipe.preprocess import epoch, erp_average
from rsvpipe.spatial import fit_xdawn, lda_beamformer
from rsvpipe.synth import EogConfig, ErpTemplate, NoiseConfig, SynthConfig, synth_rsvp

E2E_CONFIG = {"seed": 42, "datasets": [{"name": "synthetic", "synth": {}}], "search": {"budget": 20, "k": 5}}


def verdict(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def random_spd(rng, d):
    A = rng.standard_normal((d, d + 4))
    return A @ A.T / (d + 4) + 1e-3 * np.eye(d)


@pytest.fixture(scope="module")
def e2e_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    cfg = root / "config.json"
    cfg.write_text(json.dumps(E2E_CONFIG))
    runs = {}
    for jobs in (1, 4):
        out = root / f"jobs{jobs}"
        t0 = time.perf_counter()
        code = cli.main(["run", "--config", str(cfg), "--out", str(out), "--jobs", str(jobs)])
        runs[jobs] = (code, out, time.perf_counter() - t0)
    return runs


def test_criterion_01_beamformer(rng):
    t0 = time.perf_counter()
    worst_constraint, beaten = 0.0, True
    for _ in range(200):
        sigma = random_spd(rng, 32)
        p = rng.standard_normal(32)
        w, J = lda_beamformer(sigma, p)
        worst_constraint = max(worst_constraint, abs(w @ p - 1.0))
        base = w @ sigma @ w
        for _ in range(100):
            d = rng.standard_normal(32)
            d -= (d @ p) / (p @ p) * p  # keep w'p = 1
            v = w + d * rng.uniform(1e-3, 1.0)
            beaten &= bool(v @ sigma @ v > base)
    elapsed = time.perf_counter() - t0
    ok = worst_constraint <= 1e-10 and beaten and elapsed < 5
    verdict(1, "beamformer constraint and optimality", ok,
            f"max |w'p-1| = {worst_constraint:.1e}, all perturbations worse = {beaten}, {elapsed:.2f} s")


def test_criterion_02_gen_eig(rng):
    mats = [(random_spd(rng, 8), random_spd(rng, 8)) for _ in range(50)]
    t0 = time.perf_counter()
    worst = 0.0
    for A, B in mats:
        vals, _ = gen_eig(A, B)
        ref = np.sort(np.linalg.eigvals(np.linalg.inv(B) @ A).real)[::-1]
        worst = max(worst, float(np.max(np.abs(vals - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - t0
    verdict(2, "generalized eigensolver vs inverse oracle", worst <= 1e-8 and elapsed < 1,
            f"max relative eigenvalue error = {worst:.1e}, {elapsed:.3f} s")


def pair_count(scores, labels):
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in itertools.product(pos, neg))
    return wins / (pos.size * neg.size)


def test_criterion_03_auc(rng):
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        labels = rng.integers(0, 2, n)
        labels[rng.choice(n, 2, replace=False)] = [0, 1]
        scores = rng.integers(0, int(rng.integers(2, 12)), n) / 4.0  # few levels, many ties
        worst = max(worst, abs(ev.auc(scores, labels) - pair_count(scores, labels)))
    elapsed = time.perf_counter() - t0
    verdict(3, "rank AUC vs exhaustive pair counting", worst <= 1e-12 and elapsed < 2,
            f"max |difference| = {worst:.1e}, {elapsed:.2f} s")


def test_criterion_04_lr_gradient(rng):
    t0 = time.perf_counter()
    worst, h = 0.0, 1e-5
    for _ in range(20):
        n, d = int(rng.integers(20, 80)), int(rng.integers(2, 10))
        X = rng.standard_normal((n, d)) * rng.uniform(0.5, 2.0)
        y = (rng.random(n) < 0.3).astype(float)
        w, b, lam = rng.standard_normal(d), float(rng.standard_normal()), float(10 ** rng.uniform(-3, 1))
        gw, gb = clf.lr_gradient(w, b, X, y, lam)
        analytic = np.r_[gw, gb]
        theta = np.r_[w, b]
        f = lambda t: clf.lr_objective(t[:-1], t[-1], X, y, lam)  # noqa: E731
        fd = np.array([(f(theta + h * e) - f(theta - h * e)) / (2 * h) for e in np.eye(d + 1)])
        rel = np.abs(fd - analytic) / np.maximum(np.abs(analytic), 1e-8)
        worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    verdict(4, "LR gradient vs central differences", worst < 1e-5 and elapsed < 2,
            f"max elementwise relative error = {worst:.1e}, {elapsed:.2f} s")


def test_criterion_05_regression_equivalences(rng):
    t0 = time.perf_counter()
    worst_blr, worst_cos = 0.0, 1.0
    for _ in range(20):
        n, d = int(rng.integers(30, 120)), int(rng.integers(2, 8))
        y = (rng.random(n) < 0.3).astype(int)
        y[:2] = [0, 1]
        X = rng.standard_normal((n, d)) + np.outer(y, rng.standard_normal(d))
        Xa = np.hstack([np.ones((n, 1)), X])
        lsr = np.linalg.lstsq(Xa, clf.regression_targets(y), rcond=None)[0]
        blr = clf.fit_blr(X, y, alpha=1e-12, beta=1.0)
        worst_blr = max(worst_blr, np.linalg.norm(np.r_[blr.bias, blr.weights] - lsr) / np.linalg.norm(lsr))
        w = clf.fit_lda(X, y, shrinkage=False).weights
        worst_cos = min(worst_cos, abs(w @ lsr[1:]) / (np.linalg.norm(w) * np.linalg.norm(lsr[1:])))
    elapsed = time.perf_counter() - t0
    ok = worst_blr <= 1e-6 and worst_cos > 1 - 1e-6 and elapsed < 1
    verdict(5, "BLR and LDA vs least squares", ok,
            f"max BLR relative diff = {worst_blr:.1e}, min LDA |cos| = {worst_cos:.12f}, {elapsed:.3f} s")


@pytest.mark.slow
def test_criterion_06_synthetic_ordering(e2e_runs):
    code, out, elapsed = e2e_runs[1]
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    ds = report["datasets"][0]
    assert ds["n_epochs"] + ds["dropped"] + sum(ds["rejected"].values()) == 9 * 180
    auc = report["results"]["auc"]
    checks, parts = [], []
    for c in ("LDA", "BLR", "LR"):
        none = auc[f"NONE_{c}"]["mean"]
        for f in ("MTWLB", "xDAWN"):
            a = auc[f"{f}_{c}"]["mean"]
            checks.append(a >= none - 0.01 and a >= 0.85)
            parts.append(f"{f}_{c}={a:.3f}")
        parts.append(f"NONE_{c}={none:.3f}")
    ok = all(checks) and elapsed < 600
    verdict(6, "synthetic end-to-end ordering", ok, f"{', '.join(parts)}; {elapsed:.0f} s")


def test_criterion_07_noiseless_recovery():
    t0 = time.perf_counter()
    quiet = dict(noise=NoiseConfig(background_std_uv=0.0, sensor_std_uv=0.0), eog=EogConfig(0.0, 0.0, 0.0, 0.0))
    cfg = SynthConfig(blocks=2, images_per_block=60, targets_per_block=5, min_target_gap=7, evoked_templates=[], **quiet)
    rec, _ = synth_rsvp(cfg)
    es = epoch(rec, (0.0, 1.0)).pick_channels(cfg.eeg_channels)
    t = np.arange(es.n_times) / es.rate
    expected = sum(tpl.pattern(cfg.eeg_channels)[:, None] * tpl.waveform(t)[None, :] for tpl in cfg.erp_templates)
    err = float(np.abs(erp_average(es, "target") - expected).max())

    topo = np.zeros(32)
    support = [cfg.eeg_channels.index("Pz"), cfg.eeg_channels.index("P3")]
    topo[support] = [1.0, 0.8]
    cfg2 = SynthConfig(blocks=3, images_per_block=120, targets_per_block=8, min_target_gap=7, evoked_templates=[],
                       erp_templates=[ErpTemplate(0.35, 0.06, 5.0, topo.tolist())],
                       noise=NoiseConfig(background_std_uv=0.0, sensor_std_uv=1.0), eog=quiet["eog"], seed=7)
    rec2, _ = synth_rsvp(cfg2)
    bank = fit_xdawn(epoch(rec2, (0.0, 1.0)).pick_channels(cfg2.eeg_channels), 1)
    w = bank.filters[:, 0]
    share = float(np.sum(w[support] ** 2) / np.sum(w**2))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-9 and share >= 0.8 and elapsed < 30
    verdict(7, "noiseless template recovery", ok,
            f"max |ERP - template| = {err:.1e}, xDAWN top-filter energy on support = {share:.3f}, {elapsed:.2f} s")


MTWLB_MEANS = [88.2, 93.5, 91.6, 97.0, 91.8, 93.8, 93.3, 90.7, 91.4]
XDAWN_MEANS = [88.0, 93.6, 92.8, 97.0, 91.7, 94.6, 93.2, 90.8, 90.3]


def test_criterion_08_anova_regression():
    t0 = time.perf_counter()
    res = ev.one_way_anova([MTWLB_MEANS, XDAWN_MEANS])
    elapsed = time.perf_counter() - t0
    ok = abs(res.F - 0.004) <= 0.002 and abs(res.p - 0.95) <= 0.02 and (res.df_between, res.df_within) == (1, 16)
    verdict(8, "ANOVA regression on fixed per-participant means", ok and elapsed < 1,
            f"F({res.df_between}, {res.df_within}) = {res.F:.6f}, p = {res.p:.5f}, {elapsed * 1000:.1f} ms")


@pytest.mark.slow
def test_criterion_09_determinism(e2e_runs):
    (c1, out1, t1), (c4, out4, t4) = e2e_runs[1], e2e_runs[4]
    assert c1 == 0 and c4 == 0
    a, b = (out1 / "report.json").read_bytes(), (out4 / "report.json").read_bytes()
    same_csv = (out1 / "results.csv").read_bytes() == (out4 / "results.csv").read_bytes()
    ok = a == b and same_csv and t1 + t4 < 1200
    verdict(9, "byte-identical report across parallelism", ok,
            f"report.json {len(a)} bytes identical = {a == b}, results.csv identical = {same_csv}, "
            f"jobs=1 {t1:.0f} s, jobs=4 {t4:.0f} s")


def test_criterion_10_format_round_trips(tmp_path, rng):
    t0 = time.perf_counter()
    exact, positioned = 0, 0
    for i in range(100):
        rec = random_recording(rng)
        sidecar = rio.write_recording(rec, tmp_path / f"r{i}")
        back = rio.read_recording(sidecar)
        es = random_epochs(rng)
        path = rio.write_epochs(es, tmp_path / f"e{i}.epochs")
        exact += rio.recordings_equal(back, rec) and rio.epochs_equal(rio.read_epochs(path), es)

        payload = tmp_path / f"r{i}.bin"
        payload.write_bytes(payload.read_bytes()[: int(rng.integers(0, max(payload.stat().st_size, 1)))])
        blob = path.read_bytes()
        cut = int(rng.integers(0, len(blob)))
        path.write_bytes(blob[:cut])
        errors = []
        for reader, target in ((rio.read_recording, sidecar), (rio.read_epochs, path)):
            try:
                reader(target)
            except FormatError as exc:
                errors.append(exc)
        positioned += len(errors) == 2 and all(e.offset is not None or e.line is not None for e in errors)
    elapsed = time.perf_counter() - t0
    ok = exact == 100 and positioned == 100 and elapsed < 5
    verdict(10, "format round-trips and corruption", ok,
            f"{exact}/100 bit-exact, {positioned}/100 corruptions rejected with position, {elapsed:.2f} s")
