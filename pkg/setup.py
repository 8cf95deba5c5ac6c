import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SOFICOUNT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("soficount._ckernels", ["src/soficount/_ckernels.pyx"], include_dirs=[np.get_include()])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
