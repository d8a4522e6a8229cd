#include "gapfolio/cache.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "gapfolio/errors.hpp"

namespace gapfolio {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'P', 'S', 'U', 'R', 'F', '1'};

std::string canonical_inputs(const MarketParams& p, const Grid& g, double eps) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "scheme=%d;r1=%.17g;r2=%.17g;mu=%.17g;sigma2=%.17g;d=%.17g;T=%.17g;"
                  "z_min=%.17g;z_max=%.17g;nz=%d;ns=%d;eps=%.17g",
                  kSchemeVersion, p.r1, p.r2, p.mu, p.sigma2, p.d, p.T, g.z_min, g.z_max, g.nz,
                  g.ns, eps);
    return buf;
}

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return in.gcount() == static_cast<std::streamsize>(sizeof v);
}

[[noreturn]] void corrupt(const std::string& why) {
    throw Error::io("CacheCorrupt", "cache entry failed integrity check: " + why);
}

}  // namespace

std::string surface_cache_key(const MarketParams& p, const Grid& g, double eps) {
    const std::string s = canonical_inputs(p, g, eps);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::filesystem::path resolve_cache_dir(const std::string& configured, const std::string& output_dir) {
    if (const char* env = std::getenv("GAPFOLIO_CACHE_DIR"); env && *env) return env;
    if (!configured.empty()) return configured;
    return std::filesystem::path(output_dir) / "cache";
}

bool load_surface(const std::filesystem::path& dir, const std::string& key, WSolution& out) {
    const auto bin = dir / (key + ".bin");
    std::ifstream in(bin, std::ios::binary);
    if (!in) return false;  // clean miss

    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) corrupt("bad magic");
    std::int32_t scheme, nz, ns, usable;
    double z_min, z_max, eps;
    MarketParams p;
    if (!get(in, scheme) || scheme != kSchemeVersion) corrupt("scheme version mismatch");
    if (!get(in, nz) || !get(in, ns) || !get(in, z_min) || !get(in, z_max) || !get(in, eps) ||
        !get(in, p.r1) || !get(in, p.r2) || !get(in, p.mu) || !get(in, p.sigma2) || !get(in, p.d) ||
        !get(in, p.T) || !get(in, usable))
        corrupt("truncated header");
    if (nz < 5 || ns < 1 || usable < 0 || usable >= nz) corrupt("implausible header");

    Grid g;
    g.z_min = z_min;
    g.z_max = z_max;
    g.nz = nz;
    g.ns = ns;
    if (surface_cache_key(p, g, eps) != key) corrupt("content key mismatch");

    WSolution sol;
    sol.params = p;
    sol.consts = validate_params(p);
    sol.grid = g;
    sol.epsilon = eps;
    sol.usable_from = usable;
    sol.s_nodes.resize(ns + 1);
    for (int j = 0; j <= ns; ++j) sol.s_nodes[j] = j * (p.T / ns);
    sol.w = Array2d(ns + 1, nz);
    sol.w_z = Array2d(ns + 1, nz);
    const std::streamsize surf_bytes =
        static_cast<std::streamsize>(sizeof(double)) * (ns + 1) * nz;
    in.read(reinterpret_cast<char*>(sol.w.row(0)), surf_bytes);
    if (in.gcount() != surf_bytes) corrupt("truncated w payload");
    in.read(reinterpret_cast<char*>(sol.w_z.row(0)), surf_bytes);
    if (in.gcount() != surf_bytes) corrupt("truncated w_z payload");
    sol.picard_iterations.assign(ns, 0);
    sol.residuals.assign(ns, 0.0);
    in.read(reinterpret_cast<char*>(sol.picard_iterations.data()),
            static_cast<std::streamsize>(sizeof(int)) * ns);
    in.read(reinterpret_cast<char*>(sol.residuals.data()),
            static_cast<std::streamsize>(sizeof(double)) * ns);
    if (!in) corrupt("truncated diagnostics");

    const auto meta = dir / (key + ".meta.json");
    std::ifstream metain(meta, std::ios::binary);
    if (!metain) corrupt("missing metadata sidecar");
    try {
        const auto doc = nlohmann::json::parse(metain);
        if (doc.at("key").get<std::string>() != key) corrupt("metadata key mismatch");
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        corrupt(std::string("unparseable metadata: ") + e.what());
    }
    out = std::move(sol);
    return true;
}

void store_surface(const std::filesystem::path& dir, const std::string& key, const WSolution& sol) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error::io("FileUnwritable", "cannot create cache dir: " + dir.string());

    const auto bin = dir / (key + ".bin");
    const auto tmp = dir / (key + ".bin.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error::io("FileUnwritable", "cannot write " + tmp.string());
        out.write(kMagic, 8);
        const Grid& g = sol.grid;
        const MarketParams& p = sol.params;
        put(out, std::int32_t{kSchemeVersion});
        put(out, std::int32_t{g.nz});
        put(out, std::int32_t{g.ns});
        put(out, g.z_min);
        put(out, g.z_max);
        put(out, sol.epsilon);
        put(out, p.r1);
        put(out, p.r2);
        put(out, p.mu);
        put(out, p.sigma2);
        put(out, p.d);
        put(out, p.T);
        put(out, std::int32_t{sol.usable_from});
        out.write(reinterpret_cast<const char*>(sol.w.row(0)),
                  static_cast<std::streamsize>(sizeof(double)) * (g.ns + 1) * g.nz);
        out.write(reinterpret_cast<const char*>(sol.w_z.row(0)),
                  static_cast<std::streamsize>(sizeof(double)) * (g.ns + 1) * g.nz);
        out.write(reinterpret_cast<const char*>(sol.picard_iterations.data()),
                  static_cast<std::streamsize>(sizeof(int)) * g.ns);
        out.write(reinterpret_cast<const char*>(sol.residuals.data()),
                  static_cast<std::streamsize>(sizeof(double)) * g.ns);
        if (!out) throw Error::io("FileUnwritable", "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, bin, ec);
    if (ec) throw Error::io("FileUnwritable", "cannot finalize " + bin.string());

    nlohmann::json meta;
    meta["key"] = key;
    meta["scheme_version"] = kSchemeVersion;
    meta["market"] = {{"r1", sol.params.r1}, {"r2", sol.params.r2}, {"mu", sol.params.mu},
                      {"sigma2", sol.params.sigma2}, {"d", sol.params.d}, {"T", sol.params.T}};
    meta["grid"] = {{"z_min", sol.grid.z_min},
                    {"z_max", sol.grid.z_max},
                    {"nz", sol.grid.nz},
                    {"ns", sol.grid.ns}};
    meta["eps"] = sol.epsilon;
    meta["usable_from"] = sol.usable_from;
    const auto mpath = dir / (key + ".meta.json");
    const auto mtmp = dir / (key + ".meta.json.tmp");
    {
        std::ofstream out(mtmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error::io("FileUnwritable", "cannot write " + mtmp.string());
        out << meta.dump(2) << "\n";
        if (!out) throw Error::io("FileUnwritable", "short write to " + mtmp.string());
    }
    std::filesystem::rename(mtmp, mpath, ec);
    if (ec) throw Error::io("FileUnwritable", "cannot finalize " + mpath.string());
}

}  // namespace gapfolio
