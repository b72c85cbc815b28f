from knav.config.error import ConfigError
from knav.config.defaults import defaultConfig
from knav.property import PropertyLayer, PropertyReadOnly
from configparser import ConfigParser, Error as ParserError
from pathlib import Path
import logging

logger = logging.getLogger(__name__)


OBSTACLE_KEYS = ("x", "y", "vx", "vy", "sigma", "peak")


class FileConfig(PropertyReadOnly):
    """
    Values read from INI files, each one typed after the default of the same key.

    Every file may be accompanied by a directory of the same name with a ".d" suffix; all ``*.conf``
    files in there are read after it, in name order. ``[obstacle.N]`` sections are collected into
    the ``scenario.obstacles`` list.
    """

    defaultSearchLocations = ["./koopnav.conf", "/etc/koopnav/koopnav.conf"]

    def __init__(self, file: Path = None):
        self.files = FileConfig.locate(file)
        parser = ConfigParser()
        try:
            parser.read(self.files)
        except ParserError as e:
            raise ConfigError("config", str(e))
        super().__init__(FileConfig.convert(parser))

    @staticmethod
    def locate(file: Path = None):
        def expand_base(base: Path):
            if not base.exists() or not base.is_file():
                return []
            override_dir = Path(str(base) + ".d")
            if not override_dir.exists() or not override_dir.is_dir():
                return [base]
            overrides = sorted(override_dir.glob("*.conf"))
            return [base] + [o for o in overrides if o.is_file()]

        if file is None:
            bases = [Path(b) for b in FileConfig.defaultSearchLocations]
        else:
            file = Path(file)
            if not file.is_file():
                raise ConfigError("config", "{0} doesn't exist".format(file))
            bases = [file]
        files = [o for b in bases for o in expand_base(b)]
        if files:
            logger.debug("reading configuration from %s", ", ".join(str(f) for f in files))
        return files

    @staticmethod
    def convert(parser: ConfigParser) -> PropertyLayer:
        sections = {}
        obstacles = []
        for name in parser.sections():
            if name.startswith("obstacle."):
                obstacles.append(FileConfig.convertObstacle(parser, name))
                continue
            if name not in defaultConfig:
                raise ConfigError(name, "unknown section")
            defaults = defaultConfig[name]
            layer = PropertyLayer()
            for key in parser.options(name):
                if key not in defaults or key == "obstacles":
                    raise ConfigError("{0}.{1}".format(name, key), "unknown option")
                layer[key] = FileConfig.typed(parser, name, key, defaults[key])
            sections[name] = layer
        if obstacles:
            obstacles.sort(key=lambda o: o[0])
            scenario = sections.setdefault("scenario", PropertyLayer())
            scenario["obstacles"] = [o[1] for o in obstacles]
        return PropertyLayer(**sections)

    @staticmethod
    def typed(parser: ConfigParser, section: str, key: str, default):
        try:
            if isinstance(default, bool):
                return parser.getboolean(section, key)
            if isinstance(default, int):
                return parser.getint(section, key)
            if isinstance(default, float):
                return parser.getfloat(section, key)
            return parser.get(section, key)
        except ValueError:
            raise ConfigError(
                "{0}.{1}".format(section, key),
                '"{0}" is not a valid {1}'.format(parser.get(section, key), type(default).__name__),
            )

    @staticmethod
    def convertObstacle(parser: ConfigParser, name: str):
        try:
            index = int(name.split(".", 1)[1])
        except ValueError:
            raise ConfigError(name, "obstacle sections are named obstacle.<number>")
        values = {}
        for key in parser.options(name):
            if key not in OBSTACLE_KEYS:
                raise ConfigError("{0}.{1}".format(name, key), "unknown option")
            try:
                values[key] = parser.getfloat(name, key)
            except ValueError:
                raise ConfigError("{0}.{1}".format(name, key), "not a number")
        missing = [k for k in OBSTACLE_KEYS if k not in values]
        if missing:
            raise ConfigError(name, "missing {0}".format(", ".join(missing)))
        return index, values
