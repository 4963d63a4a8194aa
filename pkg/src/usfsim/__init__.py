"""Uniform spanning trees and forests on finite boxes: samplers built on
loop-erased walks, the subforest/shifted-walk coupling, and the experiment
harness that probes component indistinguishability numerically."""

from .graph import (BoxSpec, Graph, GraphError, Quotient, WiredBox, box_center,
                    box_vertex, complete_graph, contract_and_delete,
                    cycle_graph, graph_from_text, graph_to_text, make_box,
                    path_graph, wire_boundary)
from .walks import (LoopErasedPath, WalkPath, hitting_time, intersection_count,
                    lazy_step, loop_erase, random_walk, run_until)
from .wilson import (CapExhausted, OrientedForest, PartialForest, SampleVoided,
                     complete_run, delete_root, forest_from_text,
                     forest_to_text, sample_gm, sample_wired_usf, wilson_ust)
from .analysis import (PropertySpec, components, component_sizes,
                       distinct_components, eval_property, f_sub_r, future,
                       past, past_sizes, register_property, window_mask)
from .coupling import (ConditionalEstimate, CouplingSample, RootedSystem,
                       TvEstimate, build_fmr, condition_on_ball,
                       draw_coupling_sample, estimate_conditional,
                       estimate_conditional_multi, event_b, event_c, event_d,
                       event_w, forest_window_key, run_gm, sample_conditioned,
                       tv_between, walk_taus)
from .experiments import (ExperimentConfig, StatsRecord, parse_config,
                          emit_config, read_csv, run_experiment, write_csv)
from .rng import stream

__version__ = "0.1.0"
