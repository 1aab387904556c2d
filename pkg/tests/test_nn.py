import math

import numpy as np
import pytest

from helpers import gradcheck
from rumourstance.models import BiLSTMSelfAtt, BiLSTMSelfAttConfig, FeaturesNN, FeaturesNNConfig, MicroBert, \
    MicroBertConfig, collate
from rumourstance.nn import checkpoint, layers as Ly, tensor as T
from rumourstance.nn.layers import Parameter, ParamStore
from rumourstance.nn.optim import AdamState, StateShapeMismatch, adam_step
from rumourstance.textprep import EncodedExample
from rumourstance.training import weighted_ce

TOL = 1e-4


def param(name, shape, seed=0, scale=1.0):
    return Parameter(name, np.random.default_rng(seed).normal(0, scale, shape))


def projection(shape, seed=99):
    # fixed random weights turn any output into a scalar loss
    return np.random.default_rng(seed).normal(size=shape)


def scalar(out, w):
    return T.tsum(out * w)


def check(loss_fn, params, n=60, seed=0):
    errs = gradcheck(loss_fn, params, n, seed)
    assert max(errs) <= TOL, max(errs)
    return errs


@pytest.mark.parametrize("op", [T.exp, T.tanh, T.sigmoid, T.gelu, T.relu, T.log_softmax,
                                lambda a: T.softmax(a), lambda a: T.log(T.exp(a) + 1.0),
                                lambda a: T.mean(a, axis=0), lambda a: T.transpose(a, (1, 0)),
                                lambda a: a[1:, ::2], lambda a: T.concat([a, a * 2.0], axis=0),
                                lambda a: T.stack([a, a], axis=1)])
def test_elementwise_and_shape_ops(op):
    a = param("a", (3, 5), seed=1)
    a.data += np.sign(a.data) * 0.05  # keep relu away from its kink
    w = projection(op(a).shape)
    check(lambda: scalar(op(a), w), [a], n=15)


def test_matmul_broadcast_and_take():
    a = param("a", (2, 3, 4), 1)
    b = param("b", (4, 5), 2)
    table = param("tab", (7, 4), 3)
    ids = np.array([[1, 1, 6], [0, 3, 1]])
    w = projection((2, 3, 5))
    check(lambda: scalar(T.matmul(a + T.take(table, ids), b), w), [a, b, table])


def test_masked_softmax_and_layer_norm():
    a = param("a", (2, 4, 6), 1)
    g = param("g", (6,), 2)
    b = param("b", (6,), 3)
    mask = np.zeros((2, 1, 6), dtype=bool)
    mask[0, 0, 4:] = True
    w = projection((2, 4, 6))
    check(lambda: scalar(T.layer_norm(T.softmax(a, mask) * 5.0, g, b), w), [a, g, b])


def test_dense_and_embedding_layers():
    store = ParamStore(np.random.default_rng(0), 0.5)
    store.dense("d", 6, 4)
    store.norm("n", 4)
    for name in ("tok", "seg", "pos"):
        store.weight(name, (9, 6))
    tok = np.array([[1, 2, 8], [4, 4, 0]])
    seg = np.array([[0, 0, 1], [0, 1, 1]])
    pos = np.tile(np.arange(3), (2, 1))
    w = projection((2, 3, 4))

    def loss():
        x = Ly.embedding_sum(tok, seg, pos, store["tok"], store["seg"], store["pos"])
        return scalar(Ly.norm(Ly.dense(x, store, "d"), store, "n"), w)
    check(loss, list(store.values()), n=80)


def test_transformer_layer_gradients():
    store = ParamStore(np.random.default_rng(1), 0.3)
    Ly.init_transformer_layer(store, "L", 8, 16)
    x = param("x", (2, 5, 8), 4)
    mask = np.zeros((2, 5), dtype=bool)
    mask[1, 3:] = True
    w = projection((2, 5, 8))
    check(lambda: scalar(Ly.transformer_layer(x, store, "L", 2, mask), w), [x] + list(store.values()), n=200)


def test_bilstm_gradients():
    store = ParamStore(np.random.default_rng(2), 0.4)
    Ly.init_lstm(store, "b.forward", 3, 4)
    Ly.init_lstm(store, "b.backward", 3, 4)
    x = param("x", (2, 5, 3), 5)
    w = projection((2, 5, 8))
    check(lambda: scalar(Ly.bilstm(x, store, "b", np.array([5, 3])), w), [x] + list(store.values()), n=200)


def tiny_batch(vocab=30, seed=0, lengths=(7, 4, 5)):
    rng = np.random.default_rng(seed)
    exs = []
    for n in lengths:
        tok = [2] + list(rng.integers(8, vocab, n - 2)) + [3]
        seg = [0] * (n // 2) + [1] * (n - n // 2)
        exs.append(EncodedExample(tok, seg, list(range(n))))
    return collate(exs)


def test_full_micro_classifier_loss_gradients():
    net = MicroBert(MicroBertConfig(vocab_size=30, layers=2, hidden=16, heads=4, ff=32, max_len=16,
                                    init_std=0.5), seed=3)
    batch = tiny_batch()
    gold = np.array([0, 2, 3])
    weights = np.array([1.4, 3.4, 3.3, 0.37])
    loss = lambda: weighted_ce(net.scores(batch), gold, weights)
    used = [(n, p) for n, p in net.params.items() if not n.startswith(("mlm", "nsp"))]
    # softmax is shift invariant along a row, so the key bias has an exactly zero
    # gradient; a relative error there only compares rounding noise
    params = [p for n, p in used if not n.endswith("key.bias")]
    errs = check(loss, params, n=240)
    assert len(errs) >= 200
    key_bias = [p for n, p in used if n.endswith("key.bias")]
    T.backward(loss())
    for p in key_bias:
        assert np.abs(p.grad).max() < 1e-12
        flat = p.data.reshape(-1)
        flat[0] += 1e-3
        shifted = float(loss().data)
        flat[0] -= 1e-3
        assert abs(shifted - float(loss().data)) < 1e-12


def test_bilstm_selfatt_and_features_gradients():
    net = BiLSTMSelfAtt(BiLSTMSelfAttConfig(vocab_size=30, embed=6, hidden=5, att_hidden=4, hops=2,
                                            max_len=16, init_std=0.4), seed=1)
    batch = tiny_batch()
    gold = np.array([1, 0, 3])
    check(lambda: weighted_ce(net.scores(batch), gold), list(net.params.values()), n=120)
    fnn = FeaturesNN(FeaturesNNConfig(n_features=5, hidden=7), seed=2)
    X = np.random.default_rng(0).normal(size=(6, 5))
    y = np.array([0, 1, 2, 3, 0, 1])
    trainable = [p for p in fnn.params.values() if p.trainable]
    check(lambda: weighted_ce(fnn.scores(X), y), trainable, n=60)


def brute_attention(x, params, heads):
    """Loop-based reference for one unbatched attention block."""
    L, d = x.shape
    dk = d // heads
    proj = {n: x @ params[f"a.{n}.weight"].data + params[f"a.{n}.bias"].data for n in ("query", "key", "value")}
    ctx = np.zeros((L, d))
    raws = []
    for h in range(heads):
        sl = slice(h * dk, (h + 1) * dk)
        raw = np.zeros((L, L))
        for i in range(L):
            for j in range(L):
                raw[i, j] = sum(proj["query"][i, sl][k] * proj["key"][j, sl][k] for k in range(dk)) / math.sqrt(dk)
        raws.append(raw)
        for i in range(L):
            e = [math.exp(r - raw[i].max()) for r in raw[i]]
            p = [v / sum(e) for v in e]
            ctx[i, sl] = sum(p[j] * proj["value"][j, sl] for j in range(L))
    out = ctx @ params["a.output.weight"].data + params["a.output.bias"].data
    return out, raws


def test_attention_matches_brute_force():
    store = ParamStore(np.random.default_rng(4), 0.5)
    for n in ("query", "key", "value", "output"):
        store.dense(f"a.{n}", 8, 8)
    x = np.random.default_rng(5).normal(size=(5, 8))
    out, raw, probs = Ly.multi_head_attention(T.Tensor(x), store, "a", 2)
    ref_out, ref_raw = brute_attention(x, store, 2)
    np.testing.assert_allclose(out.data, ref_out, atol=1e-12)
    for a, b in zip(raw, ref_raw):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(probs.data.sum(-1), 1.0, atol=1e-12)


def test_identity_attention_fixture():
    d, heads = 4, 1
    store = ParamStore(np.random.default_rng(0), 0.0)
    for n in ("query", "key", "value", "output"):
        store.dense(f"a.{n}", d, d)
        store[f"a.{n}.weight"].data = np.eye(d)
    _, raw, _ = Ly.multi_head_attention(T.Tensor(np.eye(d)), store, "a", heads)
    np.testing.assert_allclose(raw[0], np.eye(d) / math.sqrt(d), atol=1e-15)


def sigmoid(z):
    return 1 / (1 + np.exp(-z))


def brute_lstm(x, wi, wh, b):
    h = np.zeros(wh.shape[0])
    c = np.zeros_like(h)
    n = h.size
    outs = []
    for xt in x:
        z = xt @ wi + h @ wh + b
        i, f, g, o = sigmoid(z[:n]), sigmoid(z[n:2 * n]), np.tanh(z[2 * n:3 * n]), sigmoid(z[3 * n:])
        c = f * c + i * g
        h = o * np.tanh(c)
        outs.append(h)
    return np.array(outs)


def test_bilstm_matches_reference_and_ignores_padding():
    store = ParamStore(np.random.default_rng(6), 0.5)
    Ly.init_lstm(store, "b.forward", 3, 4)
    Ly.init_lstm(store, "b.backward", 3, 4)
    x = np.random.default_rng(7).normal(size=(2, 6, 3))
    out = Ly.bilstm(T.Tensor(x), store, "b", np.array([6, 4])).data
    w = {d: [store[f"b.{d}.{n}"].data for n in ("w_input", "w_hidden", "bias")] for d in ("forward", "backward")}
    for i, n in enumerate((6, 4)):
        fw = brute_lstm(x[i, :n], *w["forward"])
        bw = brute_lstm(x[i, :n][::-1], *w["backward"])[::-1]
        np.testing.assert_allclose(out[i, :n], np.concatenate([fw, bw], axis=1), atol=1e-12)


def test_adam_matches_hand_computation():
    p = Parameter("w", np.array([1.0, -2.0]))
    e = Parameter("b", np.array([0.5]), decay_exempt=True)
    st = AdamState(lr=0.1, weight_decay=0.5)
    p.grad = np.array([0.2, -0.4])
    e.grad = np.array([1.0])
    adam_step([p, e], st)
    # first step: m_hat = g, v_hat = g^2 so the update is sign(g) up to eps
    exp_p = np.array([1.0, -2.0]) - 0.1 * (np.array([0.2, -0.4]) / (np.array([0.2, 0.4]) + 1e-6)
                                           + 0.5 * np.array([1.0, -2.0]))
    np.testing.assert_allclose(p.data, exp_p, rtol=1e-12)
    np.testing.assert_allclose(e.data, [0.5 - 0.1 * 1.0 / (1.0 + 1e-6)], rtol=1e-12)
    skipped = Parameter("s", np.ones(2))
    adam_step([skipped], st)
    assert np.all(skipped.data == 1.0)
    st.m["w"] = np.zeros(3)
    with pytest.raises(StateShapeMismatch):
        adam_step([p], st)


def test_adam_minimizes_quadratic():
    p = Parameter("w", np.array([3.0, -4.0]))
    st = AdamState(lr=0.05, weight_decay=0.0)
    for _ in range(800):
        p.grad = 2 * p.data
        adam_step([p], st)
    assert np.abs(p.data).max() < 1e-2


def test_checkpoint_roundtrip_is_byte_exact(tmp_path):
    net = MicroBert(MicroBertConfig(vocab_size=30, hidden=16, heads=2, ff=32, max_len=16), seed=0)
    arrays = {n: p.data.astype(np.float32).astype(np.float64) for n, p in net.params.items()}
    blob = checkpoint.dumps(net.kind, net.config, arrays)
    kind, cfg, again = checkpoint.loads(blob)
    assert kind == net.kind and cfg == net.config
    assert checkpoint.dumps(kind, cfg, again) == blob
    for n in arrays:
        np.testing.assert_array_equal(again[n], arrays[n])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob[:-3])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"XXXX" + blob[4:])


def test_padding_does_not_change_outputs():
    net = MicroBert(MicroBertConfig(vocab_size=30, hidden=16, heads=4, ff=32, max_len=24), seed=0)
    bi = BiLSTMSelfAtt(BiLSTMSelfAttConfig(vocab_size=30, embed=8, hidden=6, att_hidden=5, max_len=24), seed=0)
    ex = tiny_batch(lengths=(6,))
    one = EncodedExample(list(ex.token_ids[0]), list(ex.segment_ids[0]), list(range(6)))
    for model in (net, bi):
        alone = model.scores(collate([one])).data
        padded = model.scores(collate([one], pad_to=20)).data
        mixed = model.scores(collate([EncodedExample([2] * 15, [0] * 15, list(range(15))), one])).data[1:]
        np.testing.assert_allclose(alone, padded, atol=1e-6)
        np.testing.assert_allclose(alone, mixed, atol=1e-6)


def test_backward_requires_scalar():
    a = param("a", (2, 2))
    with pytest.raises(ValueError):
        T.backward(a * 2.0)
    with pytest.raises(T.ShapeMismatch):
        T.matmul(a, param("b", (3, 3)))


def test_dropout_op():
    a = param("a", (4, 6), 1)
    w = projection((4, 6))
    check(lambda: scalar(T.dropout(a, 0.3, np.random.default_rng(5)), w), [a], n=30)
    out = T.dropout(a, 0.5, np.random.default_rng(0)).data
    kept = out != 0
    np.testing.assert_allclose(out[kept], 2 * a.data[kept])
    assert T.dropout(a, 0.5, None) is a and T.dropout(a, 0.0, np.random.default_rng(0)) is a


def test_dropout_only_while_training():
    from rumourstance.training import TrainConfig, fit_network
    cfg = MicroBertConfig(vocab_size=30, hidden=16, heads=2, ff=32, max_len=16, dropout=0.3)
    net = MicroBert(cfg, seed=0)
    batch = tiny_batch()
    first = net.scores(batch).data
    np.testing.assert_array_equal(first, net.scores(batch).data)
    net.dropout_rng = np.random.default_rng(0)
    assert not np.allclose(first, net.scores(batch).data)
    net.dropout_rng = None
    exs = [EncodedExample(list(batch.token_ids[i, :n]), list(batch.segment_ids[i, :n]), list(range(n)))
           for i, n in enumerate(batch.lengths)]
    runs = []
    for _ in range(2):
        m = MicroBert(cfg, seed=0)
        fit_network(m, exs, [0, 1, 2], TrainConfig(epochs=2, class_weighting="none"))
        assert m.dropout_rng is None
        runs.append(m.scores(batch).data)
    np.testing.assert_array_equal(*runs)
    with pytest.raises(Exception):
        MicroBertConfig(vocab_size=30, dropout=1.0)
