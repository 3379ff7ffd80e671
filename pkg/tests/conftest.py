"""Shared fixtures: the hand-solvable two-agent game and Cournot instances."""

import numpy as np
import pytest

from gneforge import (AffineCoupling, BoxSet, CommGraph, CournotSpec,
                      generate_instance, quadratic_game)


def make_toy_game():
    """Two agents, f_i = (x_i - 1)^2, coupled by x_1 + x_2 <= 1, boxes [0,1].

    Worked KKT: at x* both gradients give 2(x_i - 1) = -1, the constraint is
    tight, so stationarity needs lambda = 1 and x* = (0.5, 0.5).
    """
    boxes = [BoxSet([0.0], [1.0]), BoxSet([0.0], [1.0])]
    coupling = AffineCoupling([[[1.0]], [[1.0]]], [[0.5], [0.5]])
    graph = CommGraph(2, [(0, 1)])
    return quadratic_game(boxes, coupling, graph,
                          [[[1.0]], [[1.0]]], [[-2.0], [-2.0]])


TOY_X = np.array([0.5, 0.5])
TOY_LAM = np.array([1.0])


@pytest.fixture
def toy_game():
    return make_toy_game()


@pytest.fixture
def cournot8():
    return generate_instance(CournotSpec(seed=42))


def cournot_seeded(seed):
    return generate_instance(CournotSpec(seed=seed))
