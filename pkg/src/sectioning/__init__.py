"""Student sectioning and timetabling.

Typical flow: build or load an :class:`Instance`, section students greedily,
reduce conflict-graph edges with :func:`improve`, then timetable the result
with :func:`phased_solve`.
"""

from .generate import PRESET_NAMES, generate_instance
from .graph import (ConflictGraph, InvalidSectioningError, Sectioning, base_scg, edge_count,
                    scg_of, validate_sectioning, weighted_edge_count)
from .greedy import InfeasibleSectioningError, greedy_section
from .improve import SearchLimitError, brute_force_optimum, improve
from .instance import (Instance, InstanceError, load_instance, parse_instance,
                       serialize_instance, validate)
from .model import (ObjectiveSpec, SectioningModel, TabuList, build_model, export_model,
                    import_solution, objective_value)
from .pipeline import BenchRow, PipelineConfig, bench_table, run_pipeline
from .render import render_schedule
from .timetable import (ConflictReport, Timetable, assign_rooms, extract_tabu, legal_starts,
                        score)
from .ttsolve import phased_solve, solve
from .weights import EdgeWeights, SoftWeights

__all__ = [
    "PRESET_NAMES", "generate_instance", "ConflictGraph", "InvalidSectioningError", "Sectioning",
    "base_scg", "edge_count", "scg_of", "validate_sectioning", "weighted_edge_count",
    "InfeasibleSectioningError", "greedy_section", "SearchLimitError", "brute_force_optimum",
    "improve", "Instance", "InstanceError", "load_instance", "parse_instance",
    "serialize_instance", "validate", "ObjectiveSpec", "SectioningModel", "TabuList",
    "build_model", "export_model", "import_solution", "objective_value", "BenchRow",
    "PipelineConfig", "bench_table", "run_pipeline", "render_schedule", "ConflictReport",
    "Timetable", "assign_rooms", "extract_tabu", "legal_starts", "score", "phased_solve", "solve",
    "EdgeWeights", "SoftWeights",
]
