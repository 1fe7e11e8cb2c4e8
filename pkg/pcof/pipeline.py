#!/usr/bin/env python

"""Point-of-entry script."""

import logging
import os
import unittest

from pcof.definitions import ROOT
import pcof.pipeline_resources as pipeline_resources
import pcof.sim_harness as sim_harness

logger = logging.getLogger(__name__)


def configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def run(args):
    """
    Monte Carlo sweep pipeline: build the config, sweep, write the CSV.

    :rtype: list[pcof.sim_harness.RatePoint]
    """
    configure_logging(getattr(args, "verbose", 0) or 0)

    config = pipeline_resources.build_config(args)
    points = sim_harness.ergodic_sweep(config)

    out_dir = os.path.dirname(config.output_path)
    if out_dir and not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    sim_harness.emit_csv(points, config.output_path, sim_harness.csv_metadata(config))
    logger.info("wrote %d rate points to %s", len(points), config.output_path)
    return points


def selftest(verbosity=1):
    """Run the bundled unittest suite.

    :rtype: bool
    """
    suite = unittest.defaultTestLoader.discover(os.path.join(ROOT, "tests"),
                                                top_level_dir=os.path.dirname(ROOT))
    result = unittest.TextTestRunner(verbosity=verbosity).run(suite)
    return result.wasSuccessful()
