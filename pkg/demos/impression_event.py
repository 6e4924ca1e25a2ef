"""Walk through a single event: a nurse shouts at a patient.

Shows the post-event transients, how far they drift from the fundamentals,
and which behavior the equations would have considered most fitting.
"""

from emotrack import data_path
from emotrack.engine import (
    EventFeatures,
    apply_event,
    deflection_total,
    load_equations,
    solve_optimal_behavior,
)
from emotrack.lexicon import load_lexicon, nearest_entries

lexicon = load_lexicon(data_path("lexicon.csv"))
equations = load_equations(data_path("impression_equations.csv"))

nurse = lexicon.lookup("nurse", "identity").epa
patient = lexicon.lookup("patient", "identity").epa
shout = lexicon.lookup("shout_at", "behavior").epa

post = apply_event(equations, EventFeatures.from_abo(nurse, shout, patient))
print("post-event transients")
for name in ("Ae", "Ap", "Aa", "Be", "Bp", "Ba", "Oe", "Op", "Oa"):
    print(f"  {name}: {post[name]:+.3f}")

print(f"deflection: {deflection_total((nurse, shout, patient), post):.3f}")

# The nurse would rather do something that leaves impressions where they are.
best = solve_optimal_behavior(equations, nurse, patient)
print(f"deflection-minimising behavior EPA: ({best.e:+.2f}, {best.p:+.2f}, {best.a:+.2f})")
for entry, dist in nearest_entries(lexicon, best, "behavior", k=3):
    print(f"  close to {entry.term} (distance {dist:.2f})")
