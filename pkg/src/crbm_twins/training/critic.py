"""Random-forest critic separating data from model hidden activities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier


@dataclass
class Critic:
    forest: RandomForestClassifier

    def prob_data(self, h: np.ndarray) -> np.ndarray:
        """q(data | h) for each row."""
        proba = self.forest.predict_proba(h)
        cls = list(self.forest.classes_)
        return proba[:, cls.index(1)] if 1 in cls else np.zeros(len(h))

    def score(self, h: np.ndarray) -> np.ndarray:
        """T(h) = 2 q(data | h) - 1."""
        return 2 * self.prob_data(h) - 1


def critic_fit(pos_hidden: np.ndarray, neg_hidden: np.ndarray, rng: np.random.Generator,
               n_trees: int = 50, max_depth: int = 8) -> Critic:
    """Fit on data (label 1) and model (label 0) hidden means."""
    if len(pos_hidden) == 0 or len(neg_hidden) == 0:
        raise ValueError("critic needs both data and model hidden activities")
    X = np.vstack([pos_hidden, neg_hidden])
    y = np.r_[np.ones(len(pos_hidden)), np.zeros(len(neg_hidden))]
    forest = RandomForestClassifier(n_estimators=n_trees, max_depth=max_depth,
                                    random_state=int(rng.integers(2**31 - 1)))
    forest.fit(X, y)
    return Critic(forest)
