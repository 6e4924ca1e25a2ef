"""Affect-control-theory toolkit for chat: embedding-based lexicon
extension (words and emojis) and turn-by-turn impression/deflection
simulation."""

from .lexicon import (
    AffectiveLexicon,
    EpaVector,
    Kind,
    LexiconEntry,
    Provenance,
    load_lexicon,
    nearest_entries,
    save_lexicon,
)
from .embeddings import (
    AlignedPairs,
    EmbeddingTable,
    align_with_lexicon,
    load_embeddings,
    parse_embeddings_binary,
    parse_embeddings_text,
)
from .mapper import (
    MappingModel,
    SplitSpec,
    estimate_epa,
    evaluate_mapping,
    extend_lexicon,
    fit_mapping,
    fit_translation_matrix,
    second_order_expand,
    split_train_test,
    stepwise_fit,
)
from .engine import (
    AmalgamationEquationSet,
    EventFeatures,
    ImpressionEquationSet,
    amalgamate,
    apply_event,
    deflection_agent,
    deflection_total,
    load_amalgamation,
    load_equations,
    recommend_modifier,
    solve_optimal_behavior,
)
from .simulation import (
    Transcript,
    export_trajectory,
    load_transcript,
    render_svg,
    simulate,
    simulate_variants,
)
from .data import data_path

__version__ = "0.1.0"
