import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, jitter=1.0):
    a = rng.normal(size=(d, d))
    return a.T @ a + jitter * np.eye(d)


def composite_gradient_check(seed, nu=0.05, d_in=8, hidden=8, d=4, n_classes=3, batch=10, h=1e-5):
    """Max relative error between the analytic full-loss gradient and central differences."""
    from glrtml import embedder as emb
    from glrtml.glrt_mg import fit_mg_model
    from glrtml.loss import LossConfig, batch_loss_and_grads, total_loss
    from glrtml.numerics import ClipMode
    from glrtml.pairs import all_pairs

    rng = np.random.default_rng(seed)
    params = emb.init_params(d_in, hidden, d, n_classes, seed=seed)
    x = rng.normal(size=(batch, d_in))
    y = np.arange(batch) % n_classes
    pos, neg = all_pairs(y)
    model = fit_mg_model(rng.normal(size=(60, d)) * 0.5, rng.normal(size=(60, d)) * 2.0, ClipMode.NO_CLIP)
    cfg = LossConfig(nu=nu, alpha=1.0)

    def loss(p):
        t = emb.forward(p, x)
        pl, il, _, _ = batch_loss_and_grads(model, t.embedding, t.log_probs, y, pos, neg, cfg)
        return total_loss(pl, il, cfg.alpha)

    trace = emb.forward(params, x)
    _, _, g_emb, g_lp = batch_loss_and_grads(model, trace.embedding, trace.log_probs, y, pos, neg, cfg)
    analytic = emb.backward(params, trace, g_emb, g_lp).flat()
    flat = params.flat()
    numeric = np.empty_like(flat)
    for i in range(len(flat)):
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h
        numeric[i] = (loss(params.with_flat(up)) - loss(params.with_flat(down))) / (2 * h)
    return float(np.max(np.abs(analytic - numeric)) / np.max(np.abs(numeric)))


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(number, ok, detail)`` for the acceptance summary, then assert ``ok``."""
    def record(number, ok, detail=""):
        _CRITERIA[number] = (bool(ok), detail)
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
