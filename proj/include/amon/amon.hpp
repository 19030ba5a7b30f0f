#pragma once

#include "amon/alert.hpp"
#include "amon/config.hpp"
#include "amon/databrick.hpp"
#include "amon/detect_community.hpp"
#include "amon/detect_frechet.hpp"
#include "amon/detect_relvol.hpp"
#include "amon/error.hpp"
#include "amon/evaluate.hpp"
#include "amon/hashing.hpp"
#include "amon/heavy_hitters.hpp"
#include "amon/ingest.hpp"
#include "amon/json_io.hpp"
#include "amon/pipeline.hpp"
#include "amon/random.hpp"
#include "amon/tail.hpp"
