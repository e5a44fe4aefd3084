"""glpworld: a desk-scale generative world model.

An encoder maps pixel observations to latent states, an autoregressive
backbone predicts the next state from interaction history, and a
sliding-window diffusion decoder renders predicted states back to video.
Everything runs on numpy with deterministic, seedable randomness; a small
block-world environment supplies ground truth for training and the eval
suites.
"""

__version__ = "0.1.0"
