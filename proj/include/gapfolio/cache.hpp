#pragma once

#include <filesystem>
#include <string>

#include "gapfolio/market.hpp"
#include "gapfolio/pde_core.hpp"

namespace gapfolio {

// Content key of a solve: FNV-1a over the canonical rendering of the market
// parameters, grid, regularization and scheme version. Identical inputs hash
// identically across runs and platforms.
std::string surface_cache_key(const MarketParams& p, const Grid& g, double eps);

// Cache directory resolution: GAPFOLIO_CACHE_DIR env var wins, then the
// configured directory, then <output_dir>/cache.
std::filesystem::path resolve_cache_dir(const std::string& configured, const std::string& output_dir);

// Binary surface blob + JSON sidecar ("<key>.bin" / "<key>.meta.json").
// load returns false on a clean miss and throws io "CacheCorrupt" when the
// entry exists but fails integrity checks (magic, version, key, sizes).
bool load_surface(const std::filesystem::path& dir, const std::string& key, WSolution& out);

// Atomic store: write temp files, then rename into place.
void store_surface(const std::filesystem::path& dir, const std::string& key, const WSolution& sol);

}  // namespace gapfolio
