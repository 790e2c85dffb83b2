"""
Gamma search with a scripted trainer
====================================

Drive the extension-factor search with fixed accuracies instead of real training.
"""

# %%
import math

from ssce.pipeline import RunLedger, TrainingRecord, gamma_search

# TEI each structure reaches at gamma = 1, 2, 3, ...
script = {"A": [2.0, 2.5, 2.4, 2.3], "B": [1.0, 0.9, 0.8, 0.7]}

ledger = RunLedger(config_hash="demo", seed=0)
for name in script:
    ledger.add_baseline(TrainingRecord(name, True, 0, 50.0, 10.0, 0))


def train_cell(structure, gamma):
    name, wd = structure
    # extra time e seconds makes ln(t - t_b) = 1, so TEI equals the accuracy gain
    return TrainingRecord(name, wd, gamma, 50.0 + script[name][gamma - 1], 10.0 + math.e, 0)


# %%
gamma_search(ledger, train_cell, gamma_max=4)
print("stopped at gamma", ledger.stop_gamma)
for row in ledger.summary():
    print(row)
