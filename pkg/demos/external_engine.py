"""
Testing an engine that lives in another process
===============================================

Any program that speaks one JSON object per line on stdin/stdout can be put
under test. Here the package serves itself, first clean, then with a fault.
"""
import shlex

from tapmt.external import ExternalEngine, self_command
from tapmt.metamorphic import run_campaign

cmd = self_command()
print("engine command:", shlex.join(cmd))

###############################################################################
# A persistent process answers every request of the campaign.

with ExternalEngine(cmd, timeout_s=30, persistent=True) as engine:
    clean = run_campaign(engine, n_cases=20, master_seed=1)
print("clean engine violations:", clean.violations)

###############################################################################
# The same engine with the phase-reference fault. Only MR1 notices.

with ExternalEngine(self_command("phase_ref_defect"), persistent=True) as engine:
    faulty = run_campaign(engine, n_cases=20, master_seed=1)
print(faulty.to_table())

###############################################################################
# The request and reply formats, for writing an adapter in another language:
#
#   {"mode": "analyze", "times": [...], "elevations": [...], "trend": true,
#    "constituents": [{"name": "M2", "frequency": 0.50589}]}
#   -> {"a0": ..., "a1": ..., "constituents": [{"name", "frequency",
#       "amplitude", "phase_deg"}]}
#
#   {"mode": "predict", "times": [...], "a0": ..., "a1": ..., "constituents": [...]}
#   -> {"elevations": [...]}
#
# A reply of {"error": "..."} marks a failed request.
