import logging

logger = logging.getLogger(__name__)


def setup(level):
    logging.basicConfig(level=level, format="%(asctime)s %(message)s")
    logger.setLevel(level)


def child(name):
    return logging.getLogger(__name__ + "." + name)
