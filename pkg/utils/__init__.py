# Utils package for locopt
