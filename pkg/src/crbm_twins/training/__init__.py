"""Gradient-based fitting of CRBM parameters."""
from .adam import Adam, linear_decay
from .critic import Critic, critic_fit
from .trainer import (Hyperparams, TrainResult, adversarial_gradient, fill_missing, free_energy_gap,
                      negative_phase, positive_phase, reconstruction_error, train)
