"""
Ranking metrics and the ROC diagnostic
======================================

Average precision rewards putting relevant gallery items early.  Distractors
(label -1) are never relevant.  Only the order of scores matters.
"""
import numpy as np
from scipy.stats import chi2

from glrtml.glrt_mg import mg_full_llr
from glrtml.retrieval import average_precision, evaluate, roc_curve

print("AP [rel, irr, rel]:", average_precision([3.0, 2.0, 1.0], [True, False, True]))

rng = np.random.default_rng(0)
query_labels = np.array([0, 1, 2])
gallery_labels = np.array([0, 0, 1, 2, 2, -1, -1])
scores = rng.normal(size=(3, 7)) + 2.0 * (query_labels[:, None] == gallery_labels[None, :])
m = evaluate(scores, query_labels, gallery_labels, k_list=(1, 3))
print(f"mAP {m.map:.3f}  R@3 {m.recall_at_k[3]:.3f}  P@3 {m.precision_at_k[3]:.3f}")
print("after exp():", evaluate(np.exp(scores), query_labels, gallery_labels).map == m.map)

# One-dimensional hypotheses with variances 1 and 4.  The LLR test accepts
# small |x|, so its detection rate has a chi-square closed form.
n = 100_000
llr = lambda v: mg_full_llr(np.eye(1), 4 * np.eye(1), v.reshape(-1, 1))
curve = roc_curve(llr(rng.normal(size=n)), llr(2 * rng.normal(size=n)))
for p in (0.01, 0.1, 0.5):
    exact = chi2.cdf(4 * chi2.ppf(p, 1), 1)
    print(f"P_FA={p:<4}  empirical P_D {curve.pd_at(p):.4f}  closed form {exact:.4f}")
