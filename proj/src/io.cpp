#include "hyperctl/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hyperctl {

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << "# columns: t [s], state_norm [weighted L2], control_norm [weighted L2]\n";
    f << "t,norm,control_norm\n";
    for (size_t k = 0; k < traj.times.size(); ++k)
        f << fmt_num(traj.times[k]) << ',' << fmt_num(traj.norms[k]) << ','
          << fmt_num(traj.control_norms[k]) << '\n';
}

void write_control_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    bool cont = traj.kind == StateKind::Continuum;
    f << "# columns: t [s], " << (cont ? "eta [-]" : "component [1-based]")
      << ", U [state units]\n";
    f << "t," << (cont ? "eta" : "component") << ",value\n";
    for (size_t k = 0; k < traj.times.size(); ++k) {
        const auto& U = traj.controls[k];
        const int dim = static_cast<int>(U.size());
        for (int j = 0; j < dim; ++j) {
            double coord = cont ? (j + 0.5) / dim : j + 1;
            f << fmt_num(traj.times[k]) << ',' << fmt_num(coord) << ',' << fmt_num(U[j]) << '\n';
        }
    }
}

namespace {
constexpr char kMagic[16] = {'H', 'Y', 'P', 'E', 'R', 'S', 'T', 'E',
                             'P', '-', 'S', 'N', 'A', 'P', '0', '1'};
constexpr uint32_t kVersion = 1;
}  // namespace

void write_snapshot(const std::string& path, const std::vector<unsigned>& dims,
                    const double* data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    f.write(kMagic, 16);
    uint32_t v = kVersion, rank = static_cast<uint32_t>(dims.size());
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.write(reinterpret_cast<const char*>(&rank), 4);
    size_t total = 1;
    for (unsigned d : dims) {
        uint32_t dd = d;
        f.write(reinterpret_cast<const char*>(&dd), 4);
        total *= d;
    }
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(total * 8));
}

std::vector<double> read_snapshot(const std::string& path, std::vector<unsigned>& dims) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[16];
    f.read(magic, 16);
    if (std::memcmp(magic, kMagic, 16) != 0) throw IoError("bad snapshot magic in " + path);
    uint32_t v = 0, rank = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    f.read(reinterpret_cast<char*>(&rank), 4);
    if (v != kVersion) throw IoError("unsupported snapshot version");
    dims.resize(rank);
    size_t total = 1;
    for (uint32_t k = 0; k < rank; ++k) {
        uint32_t d = 0;
        f.read(reinterpret_cast<char*>(&d), 4);
        dims[k] = d;
        total *= d;
    }
    std::vector<double> data(total);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * 8));
    if (!f) throw IoError("truncated snapshot " + path);
    return data;
}

void write_state_snapshot(const std::string& path, const StateField& s) {
    std::vector<double> buf(s.u.size() + s.v.size());
    std::memcpy(buf.data(), s.u.data(), s.u.size() * 8);
    std::memcpy(buf.data() + s.u.size(), s.v.data(), s.v.size() * 8);
    write_snapshot(path,
                   {2u, static_cast<unsigned>(s.u.n0()), static_cast<unsigned>(s.u.n1())},
                   buf.data());
}

void write_kernel_snapshot(const std::string& path, const ContinuumKernels& ker) {
    std::vector<double> buf(ker.K.size() + ker.L.size());
    std::memcpy(buf.data(), ker.K.data(), ker.K.size() * 8);
    std::memcpy(buf.data() + ker.K.size(), ker.L.data(), ker.L.size() * 8);
    write_snapshot(path,
                   {2u, static_cast<unsigned>(ker.nx), static_cast<unsigned>(ker.nx),
                    static_cast<unsigned>(ker.ne), static_cast<unsigned>(ker.ne)},
                   buf.data());
}

void write_kernel_slice_fixed_ensemble(const std::string& path, const ContinuumKernels& ker,
                                       int eta_idx, int zeta_idx) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << "# kernel slice at ensemble nodes (" << eta_idx << ", " << zeta_idx << ")\n";
    f << "x,xi,K,L\n";
    Axis xa = space_axis(ker.nx);
    for (int a = 0; a < ker.nx; ++a)
        for (int b = 0; b <= a; ++b)
            f << fmt_num(xa[a]) << ',' << fmt_num(xa[b]) << ','
              << fmt_num(ker.K(a, b, eta_idx, zeta_idx)) << ','
              << fmt_num(ker.L(a, b, eta_idx, zeta_idx)) << '\n';
}

void write_kernel_slice_fixed_space(const std::string& path, const ContinuumKernels& ker,
                                    int x_idx, int xi_idx) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << "# kernel slice at grid point (" << x_idx << ", " << xi_idx << ")\n";
    f << "eta,zeta,K,L\n";
    Axis ea = ensemble_axis(ker.ne);
    for (int i = 0; i < ker.ne; ++i)
        for (int j = 0; j < ker.ne; ++j)
            f << fmt_num(ea[i]) << ',' << fmt_num(ea[j]) << ','
              << fmt_num(ker.K(x_idx, xi_idx, i, j)) << ','
              << fmt_num(ker.L(x_idx, xi_idx, i, j)) << '\n';
}

std::string config_hash(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& path, const std::string& cfg_hash,
                    const std::string& kernel_method, int nx, int ne, unsigned seed,
                    int workers) {
    nlohmann::json j;
    j["tool"] = "hyperctl";
    j["version"] = "0.1.0";
    j["config_hash"] = cfg_hash;
    j["kernel_method"] = kernel_method;
    j["grid"] = {{"nx", nx}, {"ne", ne}};
    j["seed"] = seed;
    j["workers"] = workers;
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path);
    f << j.dump(2) << '\n';
}

}  // namespace hyperctl
