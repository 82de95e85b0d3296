# Point-Count Workbench - Source Package
