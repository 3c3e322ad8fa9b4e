try:
    from dotenv import load_dotenv
    load_dotenv(override=False)
except ModuleNotFoundError:
    pass

import logging

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from truss_shm import log
from truss_shm.constants import Client

sentry_logging = LoggingIntegration(
    level=logging.DEBUG,
    event_level=logging.ERROR
)

# Without a DSN the SDK stays disabled
sentry_sdk.init(
    dsn=Client.sentry_dsn,
    integrations=[sentry_logging],
    release=f"{Client.name}@{Client.version}"
)

log.setup()

__version__ = Client.version
