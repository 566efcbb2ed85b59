// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hnsr/analytic_backbone.hpp"
#include "hnsr/apps.hpp"
#include "hnsr/error.hpp"
#include "hnsr/features.hpp"
#include "hnsr/geodesic.hpp"
#include "hnsr/grid.hpp"
#include "hnsr/matcher.hpp"
#include "hnsr/mesh.hpp"
#include "hnsr/mesh_io.hpp"
#include "hnsr/metrics.hpp"
#include "hnsr/noise.hpp"
#include "hnsr/parallel.hpp"
#include "hnsr/pipeline.hpp"
#include "hnsr/presets.hpp"
#include "hnsr/procedural.hpp"
#include "hnsr/pyramid_io.hpp"
#include "hnsr/voxelize.hpp"
