"""Detection metrics on two overlapping score clouds."""

import numpy as np

from entropic_ood import EvalReport, aupr, auroc, dtacc, tnr_at_tpr95

rng = np.random.default_rng(1)
id_scores = rng.normal(1.0, 1.0, size=500)   # higher means in-distribution
ood_scores = rng.normal(-1.0, 1.0, size=500)

print("AUROC      ", auroc(id_scores, ood_scores))
print("AUPR       ", aupr(id_scores, ood_scores))
print("TNR@TPR95  ", tnr_at_tpr95(id_scores, ood_scores))
print("DTACC      ", dtacc(id_scores, ood_scores))

# any strictly increasing transform leaves the rank metrics alone
print(auroc(np.exp(id_scores), np.exp(ood_scores)) == auroc(id_scores, ood_scores))

# swapping the roles gives the complement
print(auroc(ood_scores, id_scores) + auroc(id_scores, ood_scores))

# ties count half
print(auroc([0.5, 0.5], [0.5, 0.5]))

report = EvalReport()
report.add(head="isomax_plus", score="mds", ood_set="ring", status="ok",
           auroc=auroc(id_scores, ood_scores), aupr=aupr(id_scores, ood_scores),
           tnr_at_tpr95=tnr_at_tpr95(id_scores, ood_scores), dtacc=dtacc(id_scores, ood_scores))
print(report.to_csv())
