"""Suggest emojis for a chatbot about to answer a customer."""

from emotrack import data_path
from emotrack.engine import load_amalgamation, load_equations
from emotrack.lexicon import load_lexicon
from emotrack.service import ServiceState, recommend

state = ServiceState(load_lexicon(data_path("lexicon.csv")),
                     load_equations(data_path("impression_equations.csv")),
                     load_amalgamation(data_path("amalgamation.csv")))

for behavior in ("answer", "gratify", "criticize"):
    ranked = recommend(state, actor="chatbot", obj="customer", behavior=behavior, k=3)
    picks = "  ".join(f"{r['emoji']} ({r['deflection']:.2f})" for r in ranked)
    print(f"chatbot {behavior:<10} -> {picks}")
