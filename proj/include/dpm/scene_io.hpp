#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpm/scene.hpp"

namespace dpm {

// Scene text format. UTF-8, whitespace-separated tokens, '#' comments.
// Top level: camera { ... }  lights { rect { ... } ... }  primitives { ... }.
// Lengths in meters, RGB values as three reals.

namespace detail {

class Tokenizer {
public:
    explicit Tokenizer(std::istream& in) : in_(in) {}

    std::string next() {
        std::string tok;
        char c;
        while (in_.get(c)) {
            if (c == '#') {
                while (in_.get(c) && c != '\n') {}
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) return tok;
                continue;
            }
            if (c == '{' || c == '}') {
                if (!tok.empty()) { in_.unget(); return tok; }
                return std::string(1, c);
            }
            tok.push_back(c);
        }
        return tok;  // empty at EOF
    }

    std::string expect() {
        std::string t = next();
        if (t.empty()) throw std::runtime_error("scene parse: unexpected end of file");
        return t;
    }

    void expect(const std::string& want) {
        std::string t = expect();
        if (t != want) throw std::runtime_error("scene parse: expected '" + want + "', got '" + t + "'");
    }

    double number() {
        std::string t = expect();
        try {
            size_t pos = 0;
            double v = std::stod(t, &pos);
            if (pos != t.size()) throw std::invalid_argument(t);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error("scene parse: expected number, got '" + t + "'");
        }
    }

    Vec3 vec3() {
        double a = number(), b = number(), c = number();
        return {a, b, c};
    }

private:
    std::istream& in_;
};

inline Material parse_material(Tokenizer& tok) {
    std::string kind = tok.expect();
    if (kind == "diffuse") return Material::diffuse(tok.vec3());
    if (kind == "mirror") return Material::mirror();
    if (kind == "dielectric") return Material::dielectric(tok.number());
    throw std::runtime_error("scene parse: unknown material '" + kind + "'");
}

inline Primitive parse_primitive(Tokenizer& tok, const std::string& kind) {
    Primitive p;
    tok.expect("{");
    if (kind == "sphere") {
        p.kind = PrimitiveKind::Sphere;
    } else if (kind == "box") {
        p.kind = PrimitiveKind::Box;
    } else if (kind == "rect") {
        p.kind = PrimitiveKind::Rect;
    } else if (kind == "mesh") {
        p.kind = PrimitiveKind::Mesh;
        p.mesh = std::make_shared<TriMesh>();
    } else {
        throw std::runtime_error("scene parse: unknown primitive '" + kind + "'");
    }
    for (;;) {
        std::string key = tok.expect();
        if (key == "}") break;
        if (key == "material") p.material = parse_material(tok);
        else if (key == "center") p.center = tok.vec3();
        else if (key == "radius") p.radius = tok.number();
        else if (key == "min") p.box.lo = tok.vec3();
        else if (key == "max") p.box.hi = tok.vec3();
        else if (key == "corner") p.corner = tok.vec3();
        else if (key == "edge_u") p.edge_u = tok.vec3();
        else if (key == "edge_v") p.edge_v = tok.vec3();
        else if (key == "vertices") {
            int n = static_cast<int>(tok.number());
            p.mesh->vertices.reserve(n);
            for (int i = 0; i < n; ++i) {
                tok.expect("v");
                p.mesh->vertices.push_back(tok.vec3());
            }
        } else if (key == "triangles") {
            int n = static_cast<int>(tok.number());
            p.mesh->triangles.reserve(n);
            for (int i = 0; i < n; ++i) {
                tok.expect("t");
                std::uint32_t a = static_cast<std::uint32_t>(tok.number());
                std::uint32_t b = static_cast<std::uint32_t>(tok.number());
                std::uint32_t c = static_cast<std::uint32_t>(tok.number());
                p.mesh->triangles.push_back({a, b, c});
            }
        } else {
            throw std::runtime_error("scene parse: unknown primitive key '" + key + "'");
        }
    }
    if (p.kind == PrimitiveKind::Mesh) p.bvh = std::make_shared<MeshBvh>(*p.mesh);
    return p;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt(const Vec3& v) { return fmt(v.x) + " " + fmt(v.y) + " " + fmt(v.z); }

}  // namespace detail

inline Scene read_scene(std::istream& in) {
    detail::Tokenizer tok(in);
    Scene scene;
    for (;;) {
        std::string key = tok.next();
        if (key.empty()) break;
        if (key == "camera") {
            tok.expect("{");
            for (;;) {
                std::string k = tok.expect();
                if (k == "}") break;
                if (k == "origin") scene.camera.origin = tok.vec3();
                else if (k == "lookat") scene.camera.lookat = tok.vec3();
                else if (k == "up") scene.camera.up = tok.vec3();
                else if (k == "fov") scene.camera.fov_deg = tok.number();
                else throw std::runtime_error("scene parse: unknown camera key '" + k + "'");
            }
        } else if (key == "lights") {
            tok.expect("{");
            for (;;) {
                std::string k = tok.expect();
                if (k == "}") break;
                if (k != "rect") throw std::runtime_error("scene parse: unknown light '" + k + "'");
                tok.expect("{");
                AreaLight l;
                for (;;) {
                    std::string lk = tok.expect();
                    if (lk == "}") break;
                    if (lk == "corner") l.corner = tok.vec3();
                    else if (lk == "edge_u") l.edge_u = tok.vec3();
                    else if (lk == "edge_v") l.edge_v = tok.vec3();
                    else if (lk == "power") l.power = tok.vec3();
                    else throw std::runtime_error("scene parse: unknown light key '" + lk + "'");
                }
                scene.lights.push_back(l);
            }
        } else if (key == "primitives") {
            tok.expect("{");
            for (;;) {
                std::string k = tok.expect();
                if (k == "}") break;
                scene.primitives.push_back(detail::parse_primitive(tok, k));
            }
        } else {
            throw std::runtime_error("scene parse: unknown top-level key '" + key + "'");
        }
    }
    scene.validate();
    return scene;
}

inline Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene file: " + path);
    return read_scene(in);
}

inline void write_scene(std::ostream& os, const Scene& scene) {
    using detail::fmt;
    os << "camera {\n";
    os << "  origin " << fmt(scene.camera.origin) << "\n";
    os << "  lookat " << fmt(scene.camera.lookat) << "\n";
    os << "  up " << fmt(scene.camera.up) << "\n";
    os << "  fov " << fmt(scene.camera.fov_deg) << "\n";
    os << "}\n";
    os << "lights {\n";
    for (const auto& l : scene.lights) {
        os << "  rect {\n";
        os << "    corner " << fmt(l.corner) << "\n";
        os << "    edge_u " << fmt(l.edge_u) << "\n";
        os << "    edge_v " << fmt(l.edge_v) << "\n";
        os << "    power " << fmt(l.power) << "\n";
        os << "  }\n";
    }
    os << "}\n";
    os << "primitives {\n";
    for (const auto& p : scene.primitives) {
        switch (p.kind) {
            case PrimitiveKind::Sphere:
                os << "  sphere {\n";
                os << "    center " << fmt(p.center) << "\n";
                os << "    radius " << fmt(p.radius) << "\n";
                break;
            case PrimitiveKind::Box:
                os << "  box {\n";
                os << "    min " << fmt(p.box.lo) << "\n";
                os << "    max " << fmt(p.box.hi) << "\n";
                break;
            case PrimitiveKind::Rect:
                os << "  rect {\n";
                os << "    corner " << fmt(p.corner) << "\n";
                os << "    edge_u " << fmt(p.edge_u) << "\n";
                os << "    edge_v " << fmt(p.edge_v) << "\n";
                break;
            case PrimitiveKind::Mesh:
                os << "  mesh {\n";
                os << "    vertices " << p.mesh->vertices.size() << "\n";
                for (const auto& v : p.mesh->vertices) os << "    v " << fmt(v) << "\n";
                os << "    triangles " << p.mesh->triangles.size() << "\n";
                for (const auto& t : p.mesh->triangles)
                    os << "    t " << t[0] << " " << t[1] << " " << t[2] << "\n";
                break;
        }
        os << "    material ";
        switch (p.material.kind) {
            case MaterialKind::Diffuse: os << "diffuse " << fmt(p.material.albedo); break;
            case MaterialKind::Mirror: os << "mirror"; break;
            case MaterialKind::Dielectric: os << "dielectric " << fmt(p.material.ior); break;
        }
        os << "\n  }\n";
    }
    os << "}\n";
}

inline void save_scene(const std::string& path, const Scene& scene) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write scene file: " + path);
    write_scene(os, scene);
}

}  // namespace dpm
