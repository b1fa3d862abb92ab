#pragma once

#include "batch.hpp"
#include "bounds.hpp"
#include "cocob.hpp"
#include "dataset.hpp"
#include "loss.hpp"
#include "manifest.hpp"
#include "model.hpp"
#include "online.hpp"
#include "rng.hpp"
#include "wasserstein.hpp"
