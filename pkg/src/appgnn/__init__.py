"""Graph-attention reverse engineering of gate-level netlists with
approximation-mimicking node sampling."""

from .netlist import (CellDef, CellLibrary, GateInst, Netlist, NetlistError, default_library,
                      parse_cell_library, parse_netlist, simulate, write_netlist)
from .graph import (CircuitGraph, Standardizer, apply_standardizer, build_graph, feature_vector,
                    fit_standardizer, two_hop_histogram)
from .sampling import (SamplingConfig, find_datapath, identify_leaf_nodes, leaf_node_sampling,
                       random_node_sampling, sample_graph)
from .gat import GatConfig, GatModel, AdamState, adam_step, cross_entropy_loss, model_forward
from .fixtures import Dataset, FixtureSpec, augment, gen_fixture, make_splits
from .train import TrainConfig, evaluate, train

__version__ = "0.1.0"
