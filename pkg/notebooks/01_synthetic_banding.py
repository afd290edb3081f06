"""Where does MC-AA put its uncertainty?

Two Gaussian blobs centred on (0, 0) and (1, 1) overlap along the line
x1 + x2 = 1. A small ReLU network separates them almost perfectly, and the
interesting question is which test points it is *unsure* about.

MC-AA answers that by pushing each test point a little along the sign of its
loss gradient (and against it), over a symmetric grid of step sizes, and
measuring how much the predictions disagree (mutual information). Points
deep inside a blob keep their label under every push; points near the
boundary flip. So the uncertainty should concentrate in a band around the
line.

Run with ``python notebooks/01_synthetic_banding.py``; takes a few seconds.
"""
# %%
import numpy as np

from mcaa import experiment as E
from mcaa.data import boundary_distance
from mcaa.samplers import score_testset
from mcaa.training import predict, train

cfg = E.resolve_config(seed=0)
splits = E.prepare(cfg)
print(f"train/val/test sizes: {len(splits.train)}/{len(splits.val)}/{len(splits.test)}")

# %% Train the base network (20-20 ReLU, Adam, 100 epochs).
model = E.init_model(2, cfg["widths"], 0.0, E.derive_seed(cfg["seed"], "init"))
model, history = train(model, splits.train, splits.val, E.train_config(cfg))
labels, _ = predict(model, splits.test.features)
print(f"final train loss {history.train[-1]:.4f}, test accuracy {(labels == splits.test.labels).mean():.4f}")

# %% Score the test set with MC-AA: eps_max = 5e-3, 21 grid points, assumed label 0.
table = score_testset(model, splits.test.features, "mcaa", eps_max=5e-3)
dist = boundary_distance(splits.raw_test.features)

# %% Mean MI by distance to the boundary. Expect a sharp fall-off.
edges = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, np.inf]
print(f"{'distance':>14}  {'points':>6}  {'mean MI':>10}")
for lo, hi in zip(edges[:-1], edges[1:]):
    sel = (dist >= lo) & (dist < hi)
    print(f"[{lo:.2f}, {hi:>4.2f})  {sel.sum():6d}  {table.mi[sel].mean():10.3e}")

near, far = table.mi[dist < 0.1].mean(), table.mi[dist > 0.5].mean()
print(f"\nnear (< 0.1) / far (> 0.5) MI ratio: {near / far:.3g}")

# %% The most uncertain points, in raw coordinates: all hug x1 + x2 = 1.
top = np.argsort(table.mi)[::-1][:8]
for i in top:
    x1, x2 = splits.raw_test.features[i]
    print(f"x=({x1:+.3f}, {x2:+.3f})  x1+x2={x1 + x2:.3f}  MI={table.mi[i]:.3e}")
