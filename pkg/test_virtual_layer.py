"""
Tests for virtual (hashed) layers: parameter accounting, evaluation paths,
degeneracy to HashedNets and exact gradients
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from compression.exceptions import ConfigurationError, DimensionMismatchError, ResourceError
from compression.hash_family import hash_index, hash_sign
from compression.virtual_layer import VirtualLayer, default_hop_sizes
from diagnostics.gradient_check import check_layer_gradients


def make_layer(mode="funhash", d_in=6, d_out=5, K=8, U=2, G=3, hops=0, **kwargs):
    if mode == "multihop" and not hops:
        hops = 1
    return VirtualLayer(d_in, d_out, K=K, mode=mode, U=U, G=G, hops=hops, seed=17, **kwargs)


# ----------------------------------------------------------------------
# accounting


@pytest.mark.parametrize(
    "mode, names",
    [
        ("hashednets", ["w", "b"]),
        ("funhash", ["w", "alpha", "b"]),
        ("funhash-dual", ["w", "w_dual", "b"]),
        ("multihop", ["w_hop1", "alpha", "hop1_alpha", "b"]),
    ],
)
def test_parameter_names(mode, names):
    assert list(make_layer(mode).params()) == names


def test_funhash_stores_k_alpha_and_bias():
    layer = make_layer("funhash", d_in=10, d_out=7, K=12, U=4, G=3)
    assert layer.stored_parameter_count() == 12 + 13 + 7
    assert layer.virtual_parameter_count() == 10 * 7 + 7
    assert layer.compression_ratio == pytest.approx(12 / 70)
    assert layer.accounting() == {"w": 12, "alpha": 13, "b": 7, "total": 32}


def test_hashednets_forces_single_hash():
    layer = make_layer("hashednets", U=4)
    assert layer.U == 1
    assert layer.recon is None
    assert layer.stored_parameter_count() == layer.K + layer.d_out


def test_dual_space_default_size():
    layer = make_layer("funhash-dual", K=400, U=4, G=3)
    assert layer.dual_k == max(layer.recon.num_params, 50)
    assert layer.w_dual.shape == (layer.dual_k,)
    assert "alpha" not in layer.params()


def test_multihop_chain_sizes():
    assert default_hop_sizes(16, 3) == [8, 4, 2]
    layer = make_layer("multihop", K=16, hops=2)
    assert layer.hop_sizes == [8, 4]
    assert layer.w is None
    assert layer.params()["w_hop2"].shape == (4,)
    assert layer.multihop_resolve().shape == (16,)


def test_stored_count_is_invariant_under_virtual_expansion():
    small = VirtualLayer(8, 8, K=16, mode="funhash", U=4, G=3, seed=1)
    large = VirtualLayer(64, 64, K=16, mode="funhash", U=4, G=3, seed=1)
    assert small.stored_parameter_count() - small.d_out == large.stored_parameter_count() - large.d_out


# ----------------------------------------------------------------------
# configuration errors


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mode": "conv"},
        {"K": 0},
        {"hash_mode": "lazy"},
        {"mode": "funhash", "hops": 1},
        {"mode": "funhash", "G": 5},
        {"mode": "multihop", "K": 8, "hops": 1, "hop_sizes": [8]},
        {"mode": "multihop", "K": 8, "hops": 2, "hop_sizes": [4]},
        {"mode": "multihop", "K": 1, "hops": 1},
    ],
)
def test_invalid_configurations(kwargs):
    options = {"d_in": 4, "d_out": 4, "K": 8, "mode": "funhash", **kwargs}
    with pytest.raises(ConfigurationError):
        VirtualLayer(**options)


def test_forward_rejects_wrong_width():
    with pytest.raises(DimensionMismatchError):
        make_layer().forward(np.zeros((2, 7)))


def test_materialize_entry_rejects_out_of_range():
    with pytest.raises(DimensionMismatchError):
        make_layer().materialize_entry(5, 0)


# ----------------------------------------------------------------------
# evaluation paths


@pytest.mark.parametrize("mode", ["hashednets", "funhash", "funhash-dual", "multihop"])
def test_matrix_matches_entrywise_reconstruction(mode):
    layer = make_layer(mode)
    V = layer.materialize_matrix()
    assert V.shape == (5, 6)
    for i in range(5):
        for j in range(6):
            assert V[i, j] == layer.materialize_entry(i, j)


def lookup(pairs, space, i, j):
    return np.array([hash_sign(pair, i, j) * space[hash_index(pair, i, j)] for pair in pairs])


@pytest.mark.parametrize("hash_mode", ["cached", "online"])
def test_gather_inputs_uses_signed_bucket_values(hash_mode):
    layer = make_layer("funhash", U=3, hash_mode=hash_mode)
    for i in range(layer.d_out):
        for j in range(layer.d_in):
            np.testing.assert_array_equal(layer.gather_inputs(i, j), lookup(layer.family.pairs, layer.w, i, j))


def test_multihop_matches_lookup_then_g():
    layer = VirtualLayer(3, 2, K=4, mode="multihop", U=2, G=3, hops=1, hop_sizes=[2], seed=4)
    hop = layer._hops[0]
    # each entry k of w is a one-column row of the hop matrix
    w = np.array([hop.recon.forward(lookup(hop.family.pairs, layer.w_top, k, 0)) for k in range(4)])
    np.testing.assert_allclose(layer.multihop_resolve(), w, rtol=1e-14)

    V = layer.materialize_matrix()
    for i in range(2):
        for j in range(3):
            expected = layer.recon.forward(lookup(layer.family.pairs, w, i, j))
            assert V[i, j] == pytest.approx(expected, rel=1e-13)


def test_dual_entry_matches_hand_coded_g():
    layer = VirtualLayer(3, 3, K=4, mode="funhash-dual", U=2, G=3, dual_k=4, seed=12)
    for i in range(3):
        for j in range(3):
            x1, x2 = lookup(layer.family.pairs, layer.w, i, j)
            a = lookup(layer.dual_family.pairs, layer.w_dual, i, j)
            expected = a[3] * np.tanh(a[0] * x1 + a[1] * x2 + a[2]) + a[4]
            assert layer.materialize_entry(i, j) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("mode", ["hashednets", "funhash", "funhash-dual", "multihop"])
def test_forward_is_matrix_product(mode, rng):
    layer = make_layer(mode)
    layer.b[:] = rng.standard_normal(5)
    a = rng.standard_normal((4, 6))
    z, _ = layer.forward(a)
    np.testing.assert_allclose(z, a @ layer.materialize_matrix().T + layer.b, rtol=1e-12)


def test_single_sample_forward_returns_vector(rng):
    layer = make_layer()
    a = rng.standard_normal(6)
    z, _ = layer.forward(a)
    assert z.shape == (5,)
    np.testing.assert_allclose(z, layer.forward(a[None, :])[0][0], rtol=1e-12)


@pytest.mark.parametrize("mode", ["hashednets", "funhash", "funhash-dual", "multihop"])
def test_online_hashing_matches_cache(mode, rng):
    cached = make_layer(mode)
    online = make_layer(mode, hash_mode="online")
    assert online.cache is None and online.dual_cache is None
    assert all(hop.cache is None for hop in online._hops)
    a = rng.standard_normal((3, 6))
    delta = rng.standard_normal((3, 5))
    z_cached, ctx_cached = cached.forward(a)
    z_online, ctx_online = online.forward(a)
    np.testing.assert_array_equal(z_cached, z_online)
    np.testing.assert_array_equal(cached.materialize_matrix(), online.materialize_matrix())

    grads_cached = cached.backward(a, delta, ctx_cached)
    grads_online = online.backward(a, delta, ctx_online)
    for name in cached.params():
        np.testing.assert_array_equal(grads_cached.params[name], grads_online.params[name])


def test_scratch_budget_limits_materialization():
    layer = make_layer(config={"max_scratch_entries": 10})
    with pytest.raises(ResourceError):
        layer.materialize_matrix()


@pytest.mark.parametrize("mode", ["hashednets", "funhash", "funhash-dual", "multihop"])
def test_streamed_blocks_match_single_block(mode, rng):
    whole = make_layer(mode)
    streamed = make_layer(mode, config={"max_scratch_entries": 12})
    assert len(streamed._row_blocks()) == 3
    a = rng.standard_normal((4, 6))
    delta = rng.standard_normal((4, 5))

    z_whole, ctx_whole = whole.forward(a)
    z_streamed, ctx_streamed = streamed.forward(a)
    np.testing.assert_allclose(z_streamed, z_whole, rtol=1e-12)

    grads_whole = whole.backward(a, delta, ctx_whole)
    grads_streamed = streamed.backward(a, delta, ctx_streamed)
    for name in whole.params():
        np.testing.assert_allclose(
            grads_streamed.params[name], grads_whole.params[name], rtol=1e-10, atol=1e-14
        )


@pytest.mark.parametrize("mode", ["funhash", "funhash-dual"])
def test_worker_count_does_not_change_results(mode, rng):
    serial = make_layer(mode, d_out=9, config={"max_scratch_entries": 12, "workers": 1})
    parallel = make_layer(mode, d_out=9, config={"max_scratch_entries": 12, "workers": 4})
    a = rng.standard_normal((3, 6))
    delta = rng.standard_normal((3, 9))

    z_serial, ctx_serial = serial.forward(a)
    z_parallel, ctx_parallel = parallel.forward(a)
    np.testing.assert_array_equal(z_serial, z_parallel)

    grads_serial = serial.backward(a, delta, ctx_serial)
    grads_parallel = parallel.backward(a, delta, ctx_parallel)
    for name in serial.params():
        np.testing.assert_array_equal(grads_serial.params[name], grads_parallel.params[name])
    np.testing.assert_array_equal(grads_serial.d_input, grads_parallel.d_input)


def test_backward_without_context_recomputes(rng):
    layer = make_layer("funhash-dual")
    a = rng.standard_normal((2, 6))
    delta = rng.standard_normal((2, 5))
    _, ctx = layer.forward(a)
    with_ctx = layer.backward(a, delta, ctx)
    without = layer.backward(a, delta)
    for name in layer.params():
        np.testing.assert_array_equal(with_ctx.params[name], without.params[name])


def test_dict_round_trip_rebuilds_same_layer(rng):
    layer = make_layer("multihop", K=12, hops=2)
    rebuilt = VirtualLayer.from_dict(layer.to_dict())
    a = rng.standard_normal((2, 6))
    np.testing.assert_array_equal(layer.forward(a)[0], rebuilt.forward(a)[0])


# ----------------------------------------------------------------------
# degeneracy


def test_selector_funhash_reproduces_hashednets(rng):
    hashed = VirtualLayer(8, 8, K=4, mode="hashednets", seed=99)
    selector = VirtualLayer(8, 8, K=4, mode="funhash", U=2, G=2, seed=99)
    selector.recon.set_selector(0)
    np.testing.assert_array_equal(hashed.w, selector.w)

    a = rng.standard_normal((5, 8))
    z_hashed, ctx_hashed = hashed.forward(a)
    z_selector, ctx_selector = selector.forward(a)
    np.testing.assert_array_equal(z_hashed, z_selector)

    delta = rng.standard_normal((5, 8))
    d_w_hashed = hashed.backward(a, delta, ctx_hashed).d_w
    d_w_selector = selector.backward(a, delta, ctx_selector).d_w
    np.testing.assert_allclose(d_w_selector, d_w_hashed, rtol=1e-12, atol=1e-15)


# ----------------------------------------------------------------------
# gradients


@given(
    d_in=st.integers(min_value=1, max_value=8),
    d_out=st.integers(min_value=1, max_value=8),
    K=st.integers(min_value=2, max_value=8),
    variant=st.sampled_from(
        [
            ("hashednets", 1, 3),
            ("funhash", 2, 2),
            ("funhash", 2, 3),
            ("funhash", 4, 2),
            ("funhash", 4, 3),
            ("funhash-dual", 2, 3),
            ("funhash-dual", 4, 2),
            ("multihop", 2, 3),
        ]
    ),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_gradients_match_finite_differences(d_in, d_out, K, variant, seed):
    mode, U, G = variant
    rng = np.random.default_rng(seed)
    layer = VirtualLayer(
        d_in, d_out, K=K, mode=mode, U=U, G=G, hops=int(mode == "multihop"), seed=seed
    )
    layer.b[:] = rng.standard_normal(d_out)
    errors = check_layer_gradients(layer, rng.standard_normal((3, d_in)), rng)
    assert max(errors.values()) < 1e-5, errors


def test_scalar_layer_gradients_match_closed_form():
    layer = VirtualLayer(1, 1, K=3, mode="funhash", U=1, G=2, seed=8)
    v, c = 1.7, 0.3
    layer.recon.alpha[:] = [v, c]
    layer.w[:] = [0.5, -0.8, 1.2]
    (pair,) = layer.family.pairs
    h, xi = hash_index(pair, 0, 0), hash_sign(pair, 0, 0)
    x = xi * layer.w[h]

    a, delta = 0.9, -2.5
    z, ctx = layer.forward(np.array([a]))
    assert z[0] == pytest.approx((v * x + c) * a, rel=1e-14)

    grads = layer.backward(np.array([a]), np.array([delta]), ctx)
    expected_d_w = np.zeros(3)
    expected_d_w[h] = a * delta * xi * v
    np.testing.assert_allclose(grads.params["w"], expected_d_w, rtol=1e-14)
    np.testing.assert_allclose(grads.params["alpha"], [a * delta * x, a * delta], rtol=1e-14)
    np.testing.assert_allclose(grads.params["b"], [delta])
    np.testing.assert_allclose(grads.d_input, [delta * (v * x + c)], rtol=1e-14)
