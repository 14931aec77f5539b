#pragma once

#include "gr3d/annotate.hpp"
#include "gr3d/client.hpp"
#include "gr3d/cloud.hpp"
#include "gr3d/config.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/eval.hpp"
#include "gr3d/extract.hpp"
#include "gr3d/format.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/manifest.hpp"
#include "gr3d/pipeline.hpp"
#include "gr3d/primitives.hpp"
#include "gr3d/raster.hpp"
#include "gr3d/rng.hpp"
#include "gr3d/room.hpp"
#include "gr3d/sha256.hpp"
#include "gr3d/spatial_qa.hpp"
#include "gr3d/synth.hpp"
#include "gr3d/textref.hpp"
#include "gr3d/voxel.hpp"
