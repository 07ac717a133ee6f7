"""Regenerates the evaluate golden files with scikit-learn as the reference."""
import json

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score

rng = np.random.default_rng(7)
n = 60
y = (rng.random(n) < 0.2).astype(int)
s = np.round(rng.normal(size=n) + 1.2 * y, 1)  # rounding creates ties
ids = [f"r{i:03d}" for i in range(n)]
with open("eval_scores.csv", "w") as f:
    f.write("id,score,rank\n")
    for i in range(n):
        f.write(f"{ids[i]},{float(s[i])!r},0\n")
perm = rng.permutation(n)
with open("eval_labels.csv", "w") as f:
    f.write("id,label\n")
    for i in perm:
        f.write(f"{ids[i]},{y[i]}\n")
expected = {
    "average_precision": average_precision_score(y, s),
    "roc_auc": roc_auc_score(y, s),
    "n": n,
    "positives": int(y.sum()),
}
json.dump(expected, open("eval_expected.json", "w"), indent=2)
