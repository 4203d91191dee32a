from starcert.clustering.pixel import cluster_bsas, cluster_bsas_naive, rasterize_samples
from starcert.clustering.radial import cluster_radial, extract_centers, mean_dense

__all__ = ['cluster_bsas', 'cluster_bsas_naive', 'rasterize_samples',
           'cluster_radial', 'extract_centers', 'mean_dense']
