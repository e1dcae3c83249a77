# Services package for locopt
