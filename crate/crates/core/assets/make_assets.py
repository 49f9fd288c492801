"""Regenerates the bench assets (scene image and the two blur kernels).

The scene is scikit-image's CC0 "camera" photograph (Lav Varshney),
box-downsampled from 512x512 to 256x256.
"""
import numpy as np
from skimage import data


def write_pgm(path, img):
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n# CC0 camera photograph by Lav Varshney, 2x box-downsampled\n")
        fh.write(f"{w} {h}\n255\n".encode())
        fh.write(img.astype(np.uint8).tobytes())


def stroke_kernel(size, points, samples=4000, sigma=0.0):
    """Rasterises a polyline camera-shake path with bilinear splatting."""
    k = np.zeros((size, size))
    pts = np.asarray(points, dtype=float)
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    t = np.linspace(0.0, lengths.sum(), samples)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    for s in t:
        i = min(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        a = (s - cum[i]) / lengths[i]
        x, y = pts[i] + a * seg[i]
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        fx, fy = x - x0, y - y0
        for dx, dy, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                            (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
            k[y0 + dy, x0 + dx] += wgt
    k[k < 0.02 * k.max()] = 0.0
    return k / k.sum()


def write_kernel(path, k):
    with open(path, "w") as fh:
        for row in k:
            fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")


cam = data.camera().astype(float)
small = cam.reshape(256, 2, 256, 2).mean(axis=(1, 3))
write_pgm("camera256.pgm", np.clip(np.round(small), 0, 255))

# Moderate, irregular shake path inside a 13x13 support.
fig1 = stroke_kernel(13, [(2.0, 7.5), (4.5, 4.0), (7.0, 3.0), (8.0, 6.0),
                          (6.5, 8.5), (9.0, 10.0), (10.5, 8.0)])
write_kernel("psf_fig1.txt", fig1)

# Long curved motion path inside a 31x31 support.
fig2 = stroke_kernel(31, [(2.0, 20.0), (7.0, 13.0), (13.0, 9.0), (19.0, 10.0),
                          (24.0, 15.0), (28.0, 11.0)])
write_kernel("psf_fig2.txt", fig2)
