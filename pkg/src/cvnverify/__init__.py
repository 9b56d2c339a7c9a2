"""Verify concurrency models written in CIR by translating them to guarded Petri nets."""

from .analysis import analyze, explore
from .checker import autofix, check
from .cirtext import load_cir, parse_cir, serialize_cir
from .diagnostics import build_diag, render_goal_violation, render_repair_prompt, select_bug
from .repair import LoopConfig, run_loop
from .translate import translate
from .verify import verify_artifact, verify_text

__version__ = "0.1.0"

__all__ = [
    "analyze", "autofix", "build_diag", "check", "explore", "load_cir", "LoopConfig", "parse_cir",
    "render_goal_violation", "render_repair_prompt", "run_loop", "select_bug", "serialize_cir",
    "translate", "verify_artifact", "verify_text",
]
