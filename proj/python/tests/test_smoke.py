import os
from pathlib import Path

import numpy as np
import pytest

import ghostrnn as gr


def blob(rng, side=8):
    img = rng.random((side, side))
    img[img < 0.6] = 0.0
    return img


def test_speckles_are_seeded_and_binary():
    a = gr.generate_speckles(7, 10, 8, 8)
    b = gr.generate_speckles(7, 10, 8, 8)
    assert a.count == 10 and len(a) == 10
    assert a.distribution == "binary"
    np.testing.assert_array_equal(a.patterns(), b.patterns())
    assert set(np.unique(a.patterns())) <= {0.0, 1.0}
    assert a.prefix(4).patterns().shape == (4, 8, 8)
    assert gr.sampling_count(0.25, 784) == 196


def test_correlation_matches_numpy():
    rng = np.random.default_rng(0)
    img = blob(rng)
    s = gr.generate_speckles(3, 40, 8, 8, "uniform")
    m = gr.measure(s, img)
    p = s.patterns()
    buckets = np.asarray(m.buckets)
    np.testing.assert_allclose(buckets, (p * img).sum(axis=(1, 2)), rtol=1e-12)
    np.testing.assert_allclose(gr.correlate(m), np.tensordot(buckets, p, axes=1), rtol=1e-12)
    gi = gr.reconstruct_gi(m)
    assert gi.min() == 0.0 and gi.max() == 1.0


def test_cs_beats_correlation_on_a_sparse_target():
    rng = np.random.default_rng(1)
    img = blob(rng)
    m = gr.measure(gr.generate_speckles(5, 48, 8, 8), img)
    cs, iterations, objective = gr.reconstruct_cs(m)
    assert cs.shape == (8, 8)
    assert 1 <= iterations <= 500
    assert objective >= 0.0
    assert gr.psnr(cs, img) > gr.psnr(gr.reconstruct_gi(m), img)


def test_train_predict_and_checkpoint(tmp_path):
    rng = np.random.default_rng(2)
    images = np.stack([blob(rng) for _ in range(8)])
    s = gr.generate_speckles(9, 12, 8, 8)
    model, losses = gr.train(images, s, hidden=8, layers=1, epochs=3, batch=4)
    assert len(losses) == 3 and all(np.isfinite(losses))
    assert model.encoding == "modulated"
    m = gr.measure(s, images[0])
    out = model.predict(m)
    assert out.shape == (8, 8)
    assert out.min() >= 0.0 and out.max() <= 1.0

    path = tmp_path / "m.girnn"
    model.save(path)
    back = gr.load_model(path)
    assert back.hidden_size == 8 and back.sequence_length == 12
    np.testing.assert_allclose(back.predict(m), out, atol=1e-5)

    with pytest.raises(ValueError, match="speckle mismatch"):
        model.predict(gr.measure(gr.generate_speckles(10, 12, 8, 8), images[0]))


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        gr.generate_speckles(1, 4, 8, 8, "gaussian")
    with pytest.raises(ValueError):
        gr.measure(gr.generate_speckles(1, 4, 8, 8), np.full((8, 8), 2.0))
    bad = tmp_path / "bad.girnn"
    bad.write_bytes(b"NOTACKPT")
    with pytest.raises(gr.FormatError):
        gr.load_model(bad)
    with pytest.raises(OSError):
        gr.load_model(tmp_path / "missing.girnn")


def test_mnist_loads():
    root = Path(os.environ.get("GHOSTRNN_DATA_DIR", Path(__file__).parents[2] / "data" / "mnist"))
    if not (root / "t10k-images-idx3-ubyte").exists():
        pytest.skip("MNIST files not present")
    images, labels = gr.load_mnist(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte")
    assert images.shape[1:] == (28, 28)
    assert len(labels) == images.shape[0]
    assert 0.0 <= images.min() and images.max() <= 1.0
