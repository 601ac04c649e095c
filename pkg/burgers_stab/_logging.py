import logging

logger = logging.getLogger("burgers_stab")
logger.setLevel(logging.INFO)
handler = logging.StreamHandler()
handler.setFormatter(logging.Formatter("[burgers-stab] %(asctime)s %(name)s %(levelname)s %(message)s"))
logger.addHandler(handler)
