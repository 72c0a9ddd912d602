"""Smoke test for the ish Python module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import ish


def main():
    assert ish.FORMAT_VERSION == 1

    images = ish.synth_corpus(3, size=256, seed=1)
    img = images[0]
    assert (img.width, img.height) == (256, 256)

    corners = ish.detect(img)
    assert len(corners) >= 2
    assert corners[0][2] >= corners[-1][2]

    params = ish.Params(k=10)
    h = ish.compute_ish(img, params)
    assert h.n_c == len(corners)
    assert h.eigenvalues[0] == 0.0 or abs(h.eigenvalues[0]) < 1e-9
    assert ish.compute_ish(img, params) == h

    turned = ish.compute_ish(img.rot90(), params)
    for metric in ("ord", "sp", "sp_delta"):
        assert ish.distance(h, h, metric) == 0.0
    assert ish.distance(h, turned, "sp") < 1e-6

    other = ish.compute_ish(images[1], params)
    assert ish.distance(h, other, "ord") > 0.0

    assert ish.Hash.parse(h.to_bytes()) == h
    assert ish.Hash.parse(h.to_text().encode()) == h

    rotated = img.transform(rotation=math.pi / 6, scale=1.1)
    assert rotated.width > img.width

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "scene.pgm")
        img.save_pgm(path)
        assert ish.load_image(path).width == 256

    try:
        ish.compute_ish(ish.Image(32, 32, [0.5] * 1024))
    except ish.NoCornersError:
        pass
    else:
        raise AssertionError("blank image hashed")

    auc, points = ish.roc([(0.1, True), (0.2, True), (0.5, False), (0.9, False)])
    assert auc == 1.0
    assert points[0][1:] == (0.0, 0.0) and points[-1][1:] == (1.0, 1.0)

    print("smoke test passed")


if __name__ == "__main__":
    main()
