"""Acceptance criteria, one test each.

Every test records PASS/FAIL with a short measurement line; the lines are
printed as they happen and repeated in the pytest terminal summary.
"""

import contextlib
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE
from qp_oracle import PROBES, qp_svm, random_dataset
from scipy import ndimage

import smokedet.classify as classify_mod
from smokedet import synth
from smokedet.classify import DEFAULT_GRID, cross_eval, rbf_kernel, smo_solve, train_svm
from smokedet.config import PipelineConfig
from smokedet.ingest import make_grid
from smokedet.motion import AmoState, direction_codes, filter_by_umr, umr_map
from smokedet.pipeline import run_detection, train_pipeline_models
from smokedet.shi import ShiMap, decide_and_update
from smokedet.spacetime import color_moments, hu_moments, top_length
from smokedet.texture import (BGC3_ORDER, BenchmarkRow, bgc_loop_raw, get_kernel, hep_histograms,
                              kernel_registry, neighborhoods, select_descriptor)

pytestmark = pytest.mark.acceptance


@contextlib.contextmanager
def criterion(n, title):
    info = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException:
        ACCEPTANCE[n] = (False, f"{title}: {info['detail']} ({time.perf_counter() - t0:.1f} s)")
        print(f"criterion {n}: FAIL  {ACCEPTANCE[n][1]}")
        raise
    ACCEPTANCE[n] = (True, f"{title}: {info['detail']} ({time.perf_counter() - t0:.1f} s)")
    print(f"criterion {n}: PASS  {ACCEPTANCE[n][1]}")


def _random_images(n, seed, high=256):
    return np.random.default_rng(seed).integers(0, high, (n, 32, 32)).astype(np.uint8)


def test_01_dimensions():
    with criterion(1, "descriptor and TOP dimensions") as info:
        t0 = time.perf_counter()
        table_i = {"LBP": 256, "RT": 9, "RTU": 45, "MTS": 16, "CS-LBP": 16, "CBP": 32,
                   "BGC1": 255, "BGC2": 225, "BGC3": 255, "GLD": 256}
        table_iv = {"uniform-LBP": 177, "EOH": 48, "BGC3": 765, "RTU": 135}
        got_i = {k: kernel_registry()[k].bin_count for k in table_i}
        got_iv = {k: top_length(k) for k in table_iv}
        elapsed = time.perf_counter() - t0
        info["detail"] = f"{len(got_i)} kernels, {len(got_iv)} TOP lengths"
        assert got_i == table_i
        assert got_iv == table_iv
        assert elapsed < 1.0


def test_02_histogram_normalisation():
    with criterion(2, "histograms sum to one") as info:
        t0 = time.perf_counter()
        images = _random_images(1000, 2)
        worst = 0.0
        for name, kernel in kernel_registry().items():
            codes = kernel.codes(images)
            assert codes.min() >= 0 and codes.max() < kernel.bin_count, name
            sums = hep_histograms(images, name).sum(axis=1)
            worst = max(worst, float(np.abs(sums - 1).max()))
        elapsed = time.perf_counter() - t0
        info["detail"] = f"12 kernels x 1000 images, max |sum-1| = {worst:.1e}"
        assert worst <= 1e-9
        assert elapsed < 30


def test_03_uniform_census_and_bgc_zero():
    with criterion(3, "uniform census and BGC raw code 0") as info:
        def transitions(p):
            return sum(((p >> k) & 1) != ((p >> ((k + 1) % 8)) & 1) for k in range(8))

        uniform = [p for p in range(256) if transitions(p) <= 2]
        # a ring of 0/1 values against a centre of 1 reproduces pattern p exactly
        ring_bits = np.array([[(p >> k) & 1 for p in range(256)] for k in range(8)])
        lut = get_kernel("uniform-LBP").pattern_fn(np.ones(256, int), ring_bits)
        lut_bins = {int(v) for v in lut[uniform]}
        assert (np.delete(lut, uniform) == 58).all()
        _, ring = neighborhoods(_random_images(1000, 3))
        zeros = {name: int((bgc_loop_raw(ring, order) == 0).sum())
                 for name, order in (("BGC1", range(8)), ("BGC3", BGC3_ORDER))}
        info["detail"] = f"{len(uniform)} uniform patterns, raw-0 counts {zeros}"
        assert len(uniform) == 58
        assert lut_bins == set(range(58))
        assert zeros == {"BGC1": 0, "BGC3": 0}


def test_04_gray_shift_invariance():
    with criterion(4, "gray-shift invariance") as info:
        images = _random_images(100, 4, high=151)
        names = sorted(kernel_registry())
        checked = 0
        for img in images:
            for c in (1, 50, 200 - int(img.max())):
                shifted = img.astype(np.int32) + c
                assert shifted.max() <= 255
                for name in names:
                    a = hep_histograms(img[None], name)
                    b = hep_histograms(shifted.astype(np.uint8)[None], name)
                    assert np.array_equal(a, b), (name, c)
                    checked += 1
        info["detail"] = f"{checked} histogram pairs bit-identical"


def test_05_moments():
    with criterion(5, "Hu and colour moments") as info:
        rng = np.random.default_rng(5)
        worst_t = worst_r = worst_cm = 0.0
        for _ in range(50):
            field = np.zeros((48, 48))
            field[8:24, 10:26] = rng.integers(0, 256, (16, 16))
            base, _ = hu_moments(field)
            dy, dx = rng.integers(0, 20, 2)
            moved, _ = hu_moments(np.roll(field, (int(dy), int(dx)), axis=(0, 1)))
            turned, _ = hu_moments(np.rot90(field))
            worst_t = max(worst_t, float(np.max(np.abs(moved - base) / np.abs(base))))
            worst_r = max(worst_r, float(np.max(np.abs(turned - base) / np.abs(base))))

            x = rng.integers(0, 256, (32, 32)).astype(float).ravel()
            n = x.size
            mu = sum(x) / n
            sd = (sum((v - mu) ** 2 for v in x) / n) ** 0.5
            m3 = sum((v - mu) ** 3 for v in x) / n
            sk = np.sign(m3) * abs(m3) ** (1 / 3)
            got = color_moments(x.reshape(32, 32))
            worst_cm = max(worst_cm, max(abs(g - w) / max(1.0, abs(w)) for g, w in zip(got, (mu, sd, sk))))
        info["detail"] = (f"translation rel {worst_t:.1e}, rotation rel {worst_r:.1e}, "
                          f"colour moments {worst_cm:.1e}")
        assert worst_t <= 1e-9
        assert worst_r <= 1e-6
        assert worst_cm <= 1e-12


def test_06_svm_solver():
    with criterion(6, "SMO vs dense QP") as info:
        t0 = time.perf_counter()
        worst_agree, worst_sum = 1.0, 0.0
        for seed in range(25):
            X, y, C, gamma = random_dataset(seed)
            assert len(X) <= 20 and X.shape[1] == 2
            alpha, _, _ = smo_solve(rbf_kernel(X, X, gamma), y, C)
            assert (alpha >= 0).all() and (alpha <= C).all()
            worst_sum = max(worst_sum, abs(float(alpha @ y)))
            model = train_svm(X, y, C, gamma)
            ref, _ = qp_svm(X, y, C, gamma)
            agree = float(np.mean(np.sign(model.decision_function(PROBES)) == np.sign(ref(PROBES))))
            worst_agree = min(worst_agree, agree)
        elapsed = time.perf_counter() - t0
        info["detail"] = f"min probe agreement {worst_agree:.4f}, max |sum a*y| {worst_sum:.1e}"
        assert worst_agree >= 0.99
        assert worst_sum <= 1e-6
        assert elapsed < 60


def test_07_protocol_arithmetic(monkeypatch):
    with criterion(7, "cross_eval protocol") as info:
        rng = np.random.default_rng(7)
        X = np.r_[rng.normal(-1, 0.5, (20, 3)), rng.normal(1, 0.5, (20, 3))]
        y = np.r_[np.ones(20), -np.ones(20)]
        calls = []
        real = classify_mod.train_svm
        monkeypatch.setattr(classify_mod, "train_svm", lambda *a, **k: calls.append(1) or real(*a, **k))
        a = cross_eval(X, y, DEFAULT_GRID, repeats=10, split=0.5, seed=11)
        counted = len(calls)
        b = cross_eval(X, y, DEFAULT_GRID, repeats=10, split=0.5, seed=11)
        info["detail"] = f"{counted} training runs counted, reported {a.n_trainings}"
        assert counted == 50 and a.n_trainings == 50
        assert np.array_equal(a.accuracies, b.accuracies) and a.best_pair == b.best_pair


def _scrolling(direction, n_frames=20, seed=8):
    rng = np.random.default_rng(seed)
    tall = 240 + 3 * n_frames
    tex = ndimage.gaussian_filter(rng.standard_normal((tall, 320)), 1.5)
    tex = np.clip(128 + 40 * tex / tex.std(), 0, 255).astype(np.uint8)
    frames = []
    for t in range(n_frames):
        off = 3 * t
        if direction == "up":
            # content moves toward row 0: the window slides down the tall texture
            frames.append(tex[off:off + 240])
        else:
            frames.append(tex[tall - 240 - off:tall - off])
    return frames


def test_08_umr():
    with criterion(8, "UMR on translating texture") as info:
        grid = make_grid(320, 240)
        ratios = {}
        kept = {}
        for direction in ("up", "down"):
            frames = _scrolling(direction)
            amo = AmoState(grid.shape, 15)
            for prev, cur in zip(frames, frames[1:]):
                amo.push(direction_codes(prev, cur, grid))
            assert len(amo) == 15
            ratios[direction] = umr_map(amo)
            kept[direction] = filter_by_umr(np.ones(grid.shape, bool), amo, 0.55)
        info["detail"] = (f"up min {np.nanmin(ratios['up']):.3f}, down max {np.nanmax(ratios['down']):.3f}, "
                          f"kept up {int(kept['up'].sum())}/{grid.rows * grid.cols}, "
                          f"kept down {int(kept['down'].sum())}, "
                          f"down blocks without votes {int(np.isnan(ratios['down']).sum())}")
        assert not np.isnan(ratios["up"]).any() and (ratios["up"] >= 0.9).all()
        # a top-row block moving down has no in-frame source window, so it gets no votes
        # and its ratio is undefined; every block that did vote must sit at <= 0.1
        voted = ~np.isnan(ratios["down"])
        assert voted[1:].all()
        assert (ratios["down"][voted] <= 0.1).all()
        assert kept["up"].all() and not kept["down"].any()


def test_09_shi():
    with criterion(9, "SHI semantics") as info:
        shi = ShiMap((1, 1), t_max=15, threshold=10)
        alarms = []
        for _ in range(3):
            final, shi = decide_and_update(shi, np.ones((1, 1), bool))
            alarms.append(bool(final[0, 0]))
        assert alarms == [False, True, True]

        rng = np.random.default_rng(9)
        shi = ShiMap((100, 100), t_max=15, threshold=10)      # 10,000 independent sequences
        lo, hi = 15, 0
        for _ in range(200):
            _, shi = decide_and_update(shi, rng.random((100, 100)) < rng.uniform(0.05, 0.95))
            lo, hi = min(lo, int(shi.counters.min())), max(hi, int(shi.counters.max()))
        info["detail"] = f"first alarm at detection #{alarms.index(True) + 1}, counters in [{lo}, {hi}]"
        assert 0 <= lo and hi <= 15


def test_10_end_to_end():
    with criterion(10, "end-to-end synthetic") as info:
        t0 = time.perf_counter()
        config = PipelineConfig()
        tex, st, report = train_pipeline_models(synth.smoke_corpus(4, 60, seed=1),
                                                synth.nonsmoke_corpus(4, 60, seed=1), config)
        t_train = time.perf_counter() - t0
        onset = 20
        latencies = []
        for seed in (100, 101, 102):
            _, m = run_detection(synth.plume_scene(90, onset=onset, seed=seed), config, tex, st)
            latencies.append(None if m.first_alarm_frame is None else m.first_alarm_frame - onset)
        false_alarms = 0
        for k in range(10):
            ev, _ = run_detection(synth.static_scene(60, seed=600 + k), config, tex, st)
            false_alarms += bool(ev)
            ev, _ = run_detection(synth.rigid_object_scene(60, seed=700 + k, color="red", direction="down"),
                                  config, tex, st)
            false_alarms += bool(ev)
        elapsed = time.perf_counter() - t0
        info["detail"] = (f"train {t_train:.0f} s (cv tex {report.texture_accuracy:.3f}, "
                          f"st {report.spacetime_accuracy['fused']:.3f}), plume latencies {latencies}, "
                          f"{false_alarms}/20 distractor videos alarmed")
        assert all(lat is not None and 0 <= lat <= 60 for lat in latencies)
        assert false_alarms == 0
        assert elapsed < 300


def test_11_select_descriptor():
    with criterion(11, "descriptor selection") as info:
        rows = [BenchmarkRow("BGC3", 0.9758, 13.78, 255, 0.32),
                BenchmarkRow("RTU", 0.9750, 17.72, 45, 0.02)]
        choice = select_descriptor(rows, acc_min=0.975, time_max=20.0, dims_max=256)
        info["detail"] = f"selected {choice}"
        assert choice == "BGC3"
