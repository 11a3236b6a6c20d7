"""
Clustering Service - k-means over standardized ratio vectors
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..schemas.mining import ClusterModel, FirmKey
from ..schemas.scoring import RatioVector
from ..utils.error_handlers import ConfigurationError

logger = logging.getLogger("bilanz.clustering")


class ClusteringService:
    """Seeded, deterministic k-means (Euclidean, farthest-point seeding)"""

    def __init__(self, max_iterations: int = 100):
        self.max_iterations = max_iterations

    @staticmethod
    def standardize(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Center each column and scale by its population stddev; constant columns are only centered"""
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        scale = np.where(std > 0, std, 1.0)
        return (matrix - mean) / scale, mean, std

    @staticmethod
    def _seed_centroids(points: np.ndarray, k: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        chosen = [int(rng.integers(len(points)))]
        nearest = ((points - points[chosen[0]]) ** 2).sum(axis=1)
        while len(chosen) < k:
            # argmax returns the lowest index among ties
            nxt = int(np.argmax(nearest))
            chosen.append(nxt)
            nearest = np.minimum(nearest, ((points - points[nxt]) ** 2).sum(axis=1))
        return points[chosen].copy()

    @staticmethod
    def _distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
        return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)

    def cluster(
        self,
        firms: Sequence[Tuple[FirmKey, RatioVector]],
        k: int,
        seed: int = 42,
        max_iterations: Optional[int] = None,
    ) -> ClusterModel:
        """
        Partition firms into k clusters

        Args:
            firms: (firm_id, period) keys with their ratio vectors
            k: number of clusters, 1 <= k <= len(firms)
            seed: picks the first centroid; everything after is deterministic
            max_iterations: iteration cap, default 100

        Returns:
            ClusterModel with centroids in standardized space and the
            within-cluster sum of squares after every iteration
        """
        if not firms:
            raise ConfigurationError("Cannot cluster an empty set of firms")
        if k < 1 or k > len(firms):
            raise ConfigurationError(f"k must lie in [1, {len(firms)}], got {k}", {"k": k, "firms": len(firms)})
        limit = max_iterations or self.max_iterations

        keys = [key for key, _ in firms]
        matrix = np.array([ratios.as_tuple() for _, ratios in firms], dtype=float)
        points, mean, std = self.standardize(matrix)

        centroids = self._seed_centroids(points, k, seed)
        labels = np.argmin(self._distances(points, centroids), axis=1)
        history: List[float] = []
        iterations = 0

        for iterations in range(1, limit + 1):
            for c in range(k):
                members = points[labels == c]
                # An emptied cluster keeps its previous centroid
                if len(members):
                    centroids[c] = members.mean(axis=0)
            distances = self._distances(points, centroids)
            new_labels = np.argmin(distances, axis=1)
            history.append(float(distances[np.arange(len(points)), new_labels].sum()))
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels

        logger.debug(f"k-means converged after {iterations} iterations, k={k}, n={len(firms)}")

        return ClusterModel(
            centroids=tuple(tuple(float(v) for v in row) for row in centroids),
            assignments={key: int(label) for key, label in zip(keys, labels)},
            standardization=tuple((float(m), float(s)) for m, s in zip(mean, std)),
            objective_history=tuple(history),
            iterations=iterations,
        )

    def assign_cluster(self, model: ClusterModel, ratios: RatioVector) -> int:
        """Nearest centroid for a new ratio vector, using the model's standardization"""
        if model.k == 0:
            raise ConfigurationError("Cluster model has no centroids")
        standardization = np.array(model.standardization, dtype=float)
        mean, std = standardization[:, 0], standardization[:, 1]
        point = (np.array(ratios.as_tuple(), dtype=float) - mean) / np.where(std > 0, std, 1.0)
        distances = ((np.array(model.centroids) - point) ** 2).sum(axis=1)
        return int(np.argmin(distances))


clustering_service = ClusteringService()
