import os
import logging
import aiofiles
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

LOG_ENV_VAR = "HBS_LOG"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(verbose: bool = False) -> None:
    """Set up root logging from HBS_LOG (default INFO); --verbose forces DEBUG."""
    level_name = os.getenv(LOG_ENV_VAR, "INFO").upper()
    level = logging.DEBUG if verbose else getattr(logging, level_name, logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def format_float(value: float) -> str:
    """17 significant digits, so identical runs give identical bytes."""
    return f"{float(value):.17g}"


async def write_output(path: Path, text: str) -> Path:
    """
    Write a UTF-8 text file with `\\n` line endings, creating parent directories.
    Returns the path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    async with aiofiles.open(path, 'w', encoding='utf-8', newline='\n') as f:
        await f.write(text)

    return path


def get_config_id(file_path: str) -> str:
    """Run name derived from a config file path."""
    return os.path.splitext(os.path.basename(file_path))[0]
