"""Conditional restricted Boltzmann machine over time blocks."""
from .io import ModelBundle, load_model, save_model
from .layout import BERNOULLI, GAUSSIAN, ONEHOT, BlockLayout, Unit
from .model import (PARAM_NAMES, CrbmParams, cond_hidden, cond_visible, energy, free_energy,
                    free_energy_grad, hidden_input, hidden_mean, init_params, visible_field)
from .exact import enumerate_states, exact_log_probs, exact_model_moments
