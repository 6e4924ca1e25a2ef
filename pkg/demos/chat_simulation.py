"""Replay the bundled customer/chatbot chat under three emoji styles.

Writes a trajectory CSV and one SVG per chart series to ``--out``.
"""

import argparse
from pathlib import Path

from emotrack import data_path
from emotrack.engine import load_amalgamation, load_equations
from emotrack.lexicon import load_lexicon
from emotrack.simulation import SVG_SERIES, export_trajectory, load_transcript, render_svg, simulate_variants

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--out", type=Path, default=Path("demo_output"))
args = parser.parse_args()
args.out.mkdir(parents=True, exist_ok=True)

transcript = load_transcript(data_path("customer_chatbot_transcript.json"))
runs = simulate_variants(transcript, load_lexicon(data_path("lexicon.csv")),
                         load_equations(data_path("impression_equations.csv")),
                         load_amalgamation(data_path("amalgamation.csv")))

print("turn  behavior                 " + "  ".join(f"{name:>8}" for name in runs))
for i, turn in enumerate(transcript.turns):
    cells = "  ".join(f"{pts[i].deflection:8.2f}" for pts in runs.values())
    print(f"{turn.index:4}  {turn.behavior:<24} {cells}")

export_trajectory(runs, args.out / "trajectory.csv")
for series in SVG_SERIES:
    render_svg(runs, series, args.out / f"{series}.svg")
print(f"wrote {args.out}/trajectory.csv and {len(SVG_SERIES)} charts")
