# Rare classes never reach the head; continual classifiers still recognise them.
import numpy as np
from tailcomp import SynthConfig, generate_synthetic, TrainConfig, train_head, compute_prototypes, evaluate
from tailcomp.transfer import build_continual, Ensemble, TransferConfig
from tailcomp.prototypes import PrototypeClassifier

train, val, test = generate_synthetic(SynthConfig(seed=1))
counts = train.train_counts
few = counts <= 20
head = train_head(train.subset(~few[train.labels]), TrainConfig(seed=1))
print("untrained head columns:", int((~head.present).sum()), "of", head.num_classes)

rep = evaluate(head, test, counts)
print("head alone, many-shot:", round(rep.acc_many, 3), " few-shot:", rep.acc_few)  # cannot predict unseen classes

protos = compute_prototypes(train)
members = [PrototypeClassifier(protos, head.scale)]
for k in (20, 100):
    m = build_continual(protos, head, counts, k, TransferConfig(mode="continual"))
    r = evaluate(m, test, counts)
    print(f"w^hc({k}) few {r.acc_few:.3f} total {r.acc_total:.3f}")
    members.append(m)
r = evaluate(Ensemble(members), test, counts)
print(f"ensemble   few {r.acc_few:.3f} total {r.acc_total:.3f}  (chance is {1 / len(counts):.3f})")
