"""CMake-driven build of the coxplain._core extension.

setuptools only orchestrates: the extension itself is configured and
compiled by the project's CMakeLists (target coxplain_pymodule), then the
resulting _core library is copied to wherever setuptools expects it.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            [
                "cmake", "--build", str(build_dir),
                "--target", "coxplain_pymodule",
                "--parallel",
            ],
            check=True,
        )
        built = sorted((build_dir / "python" / "coxplain").glob("_core*"))
        if not built:
            raise RuntimeError("CMake did not produce the _core extension")
        dest = Path(self.get_ext_fullpath(ext.name)).resolve()
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], dest)


setup(
    ext_modules=[CMakeExtension("coxplain._core")],
    cmdclass={"build_ext": CMakeBuild},
)
