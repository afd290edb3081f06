"""The uncertainty evaluation protocol on a tiny hand-made example.

Each test point has a prediction (right or wrong) and an uncertainty score.
Normalising scores to [0, 1] and sweeping a threshold t gives four states:

    TN  correct and certain      FP  correct but uncertain
    FN  incorrect yet certain    TP  incorrect and uncertain

A point is uncertain when its normalised score is strictly above t.
From those counts:

* accuracy  (TN + TP) / N     -- how often "certainty" agrees with correctness
* NPV       TN / (TN + FN)    -- a certain answer is right
* TPR       TP / (TP + FN)    -- a mistake gets flagged

and ROC / precision-recall treat "incorrect" as the positive class with the
raw score as the detector.
"""
# %%
import numpy as np

from mcaa.evaluation import UncertaintyRecords, confusion_at, evaluate

correct = np.array([True, True, True, True, False, True, False, True])
scores = np.array([0.01, 0.02, 0.10, 0.30, 0.35, 0.05, 0.80, 0.50])
rec = UncertaintyRecords(np.where(correct, 0, 1), np.zeros(8, int), scores)
print("normalised scores:", np.round(rec.u_norm, 3))

# %% Counts at a few thresholds.
for t in (0.0, 0.3, 0.6, 1.0):
    c = confusion_at(rec, t)
    print(f"t={t:.1f}  tn={c.tn} fp={c.fp} fn={c.fn} tp={c.tp}")

# %% Full curves and the threshold-free summaries.
table = evaluate(rec, n_thresholds=11)
print(f"\n{'t_u':>5} {'acc':>6} {'npv':>6} {'tpr':>6}")
for row in zip(table.t_u, table.accuracy, table.npv, table.tpr):
    print("{:5.1f} {:6.3f} {:6.3f} {:6.3f}".format(*row))
print(f"\nAUROC {table.auroc:.4f}   AUPR {table.aupr:.4f}")
# One of the two mistakes (0.80) outranks every correct point; the other (0.35)
# is beaten only by the correct point at 0.50, so AUROC = (6 + 5) / 12.
