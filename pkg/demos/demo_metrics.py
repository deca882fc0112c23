"""What the weighted metrics reward and punish.

Scores a family of perturbed maps against one ground truth: the perfect
map, dilated and eroded versions, a blurred one, and uniform noise. The
table shows how weighted precision penalizes far-from-object false
positives more than near misses, and what boundary recall adds.
"""

import numpy as np
from scipy import ndimage

import itersal

rng = np.random.default_rng(31)
size = 96
ys, xs = np.mgrid[0:size, 0:size]
gt = ((ys - 48) / 26.0) ** 2 + ((xs - 48) / 18.0) ** 2 <= 1

candidates = {
    "perfect": gt.astype(float),
    "dilated+4": ndimage.binary_dilation(gt, iterations=4).astype(float),
    "eroded-4": ndimage.binary_erosion(gt, iterations=4).astype(float),
    "blurred": ndimage.gaussian_filter(gt.astype(float), 3.0),
    "shifted+6": np.roll(gt, 6, axis=1).astype(float),
    "noise": rng.random((size, size)),
    "inverted": 1.0 - gt.astype(float),
}

print(f"{'map':>10s} {'wF':>6s} {'wPre':>6s} {'wRec':>6s} {'MAE':>6s} {'BR':>6s}")
for name, sal in candidates.items():
    r = itersal.evaluate_pair(sal, gt, name=name)
    print(f"{name:>10s} {r.wf:6.3f} {r.w_precision:6.3f} {r.w_recall:6.3f} "
          f"{r.mae:6.3f} {r.boundary_recall:6.3f}")
