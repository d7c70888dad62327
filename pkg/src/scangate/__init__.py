"""scangate: a model-serving gateway for anomaly detection on inspection scans.

The package is organized around a small set of pieces:

* ``npy_codec`` -- bit-exact encoder/decoder for the NPY v1.0 array format,
  the wire format for all scan data.
* ``registry`` -- versioned model repository with staged/active/retired
  lifecycle, atomic promotion and rollback, persisted as an event journal.
* ``inference`` -- statistical anomaly detectors over 2-D scan grids with
  user-adjustable parameter schemas.
* ``datastore`` -- ingestion and serving of NPY scan datasets.
* ``gateway`` -- authenticated HTTP API tying the above together, with an
  append-only audit trail.
* ``cli`` -- operator command line (``scangate serve`` and admin clients).
"""

__version__ = "0.1.0"
