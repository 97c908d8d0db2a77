#pragma once

#include "pixelstorm/attack.hpp"
#include "pixelstorm/base64.hpp"
#include "pixelstorm/builtin.hpp"
#include "pixelstorm/campaign.hpp"
#include "pixelstorm/dataset.hpp"
#include "pixelstorm/de.hpp"
#include "pixelstorm/error.hpp"
#include "pixelstorm/image.hpp"
#include "pixelstorm/metrics.hpp"
#include "pixelstorm/oracle.hpp"
#include "pixelstorm/parallel.hpp"
#include "pixelstorm/remote.hpp"
#include "pixelstorm/rng.hpp"
#include "pixelstorm/serialize.hpp"
