"""Joint human-robot trajectory optimization with a learned motion predictor.

Plans robot trajectories while adapting a recurrent full-body human motion
prediction to task, environment and coordination constraints, by optimizing
decoder-input modifiers and robot controls through one differentiable
computational graph.
"""

__version__ = "0.1.0"
