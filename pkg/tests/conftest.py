import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class Corridor:
    """Deterministic 1-D chain: actions left, right, stay; goal at the right end.

    Position features are one-hot, so the linear learner is tabular here.
    """

    n_actions = 3

    def __init__(self, n=10, living=-10.0, goal_reward=100.0, reachable=True):
        self.n = n
        self.n_features = n
        self.living = living
        self.goal_reward = goal_reward
        self.reachable = reachable

    def task(self, t):
        return t

    def sample_free(self, rng, k=1, exclude=None):
        return np.array([[float(rng.integers(0, self.n - 1))]])

    def step(self, s, a):
        nx = s[0] + (-1, 1, 0)[a]
        if nx < 0 or nx >= self.n:
            return np.array(s, dtype=float), True
        return np.array([nx]), False

    def full_features(self, s):
        f = np.zeros(self.n)
        f[int(s[0])] = 1.0
        return f

    def is_terminal(self, t, s):
        return self.reachable and int(s[0]) == self.n - 1

    def reward(self, t, s, collided):
        if self.is_terminal(t, s):
            return self.goal_reward
        return -100.0 if collided else self.living


@pytest.fixture
def corridor():
    return Corridor()
