#pragma once

#include "wicketlens/error.hpp"
#include "wicketlens/raster.hpp"
#include "wicketlens/pnm.hpp"
#include "wicketlens/subprocess.hpp"
#include "wicketlens/ocr.hpp"
#include "wicketlens/scoreparse.hpp"
#include "wicketlens/segmenter.hpp"
#include "wicketlens/detections.hpp"
#include "wicketlens/trajectory.hpp"
#include "wicketlens/fixtures.hpp"
#include "wicketlens/config.hpp"
