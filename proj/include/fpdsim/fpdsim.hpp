#pragma once

#include "chain.hpp"
#include "config.hpp"
#include "devices.hpp"
#include "errors.hpp"
#include "panel.hpp"
#include "scene.hpp"
#include "scene_io.hpp"
#include "seed.hpp"
#include "stimulus.hpp"
#include "validation.hpp"
#include "writers.hpp"
