#!/usr/bin/env python3
# -*- coding: utf-8 -*-


def pytest_configure(config):
    config.addinivalue_line("markers", "demos: demonstration tests")
    config.addinivalue_line("markers", "factors: factor identification tests")
    config.addinivalue_line("markers", "segmentation: segmentation tests")
    config.addinivalue_line("markers", "tsc: subgoal discovery tests")
    config.addinivalue_line("markers", "hrl: abstract MDP and option tests")
    config.addinivalue_line("markers", "learners: learner tests")
    config.addinivalue_line("markers", "envs: environment tests")
    config.addinivalue_line("markers", "train: training loop tests")
    config.addinivalue_line("markers", "cli: command-line tests")
    config.addinivalue_line("markers", "testkit: test oracle tests")
    config.addinivalue_line("markers", "common: shared utility tests")
    config.addinivalue_line("markers", "slow: long running tests")
    config.addinivalue_line("markers",
                            "acceptance: acceptance-scale runs, deselected by "
                            "default")
