# Train a cosine head on a synthetic long tail and compare it to class prototypes.
import numpy as np
from tailcomp import SynthConfig, generate_synthetic, TrainConfig, train_head, compute_prototypes, evaluate
from tailcomp.prototypes import PrototypeClassifier

cfg = SynthConfig(seed=0)
train, val, test = generate_synthetic(cfg)
counts = train.train_counts
print("classes:", train.num_classes, "train samples:", len(train))
print("largest / smallest class:", counts.max(), counts.min())
print("many / medium / few classes:", (counts >= 100).sum(), ((counts > 20) & (counts < 100)).sum(), (counts <= 20).sum())

head = train_head(train, TrainConfig(seed=0))
print("learned scale s =", round(head.scale, 3))

protos = compute_prototypes(train)
norms = np.linalg.norm(protos.prototypes, axis=0)
print("prototype norms (head, tail):", norms[:3].round(3), norms[-3:].round(3))  # tail means are noisier

for name, clf in [("cosine head", head), ("prototypes", PrototypeClassifier(protos, head.scale))]:
    rep = evaluate(clf, test, counts)
    print(f"{name:12s} many {rep.acc_many:.3f} medium {rep.acc_medium:.3f} few {rep.acc_few:.3f} total {rep.acc_total:.3f}")
# the head wins on many-shot classes, prototypes win on the few-shot ones
