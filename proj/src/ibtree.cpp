#include "msds/ibtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msds/bytes.hpp"

namespace msds {

double ball_gap(const PivotBall& a, const PivotBall& b) {
    double dx = a.pivot.x - b.pivot.x;
    double dy = a.pivot.y - b.pivot.y;
    return std::sqrt(dx * dx + dy * dy) - a.radius - b.radius;
}

std::uint64_t hash_spatial_set(const SpatialSet& s) {
    Fnv1a h;
    h.mix_str(s.dataset_id);
    h.mix_u64(s.cells.size());
    for (CellId c : s.cells) h.mix_u32(c);
    return h.value();
}

const std::vector<std::uint32_t>* LeafNode::posting(CellId c) const {
    auto it = std::lower_bound(inv.begin(), inv.end(), c,
                               [](const PostingEntry& e, CellId cell) { return e.cell < cell; });
    if (it == inv.end() || it->cell != c) return nullptr;
    return &it->datasets;
}

void LeafNode::add_to_inverted(CellId c, std::uint32_t child_idx) {
    auto it = std::lower_bound(inv.begin(), inv.end(), c,
                               [](const PostingEntry& e, CellId cell) { return e.cell < cell; });
    if (it == inv.end() || it->cell != c) it = inv.insert(it, PostingEntry{c, {}});
    auto& pl = it->datasets;
    auto pos = std::lower_bound(pl.begin(), pl.end(), child_idx);
    if (pos == pl.end() || *pos != child_idx) pl.insert(pos, child_idx);
}

void LeafNode::remove_from_inverted(std::span<const CellId> cells, std::uint32_t child_idx) {
    for (CellId c : cells) {
        auto it = std::lower_bound(inv.begin(), inv.end(), c,
                                   [](const PostingEntry& e, CellId cell) { return e.cell < cell; });
        if (it == inv.end() || it->cell != c) continue;
        auto& pl = it->datasets;
        auto pos = std::lower_bound(pl.begin(), pl.end(), child_idx);
        if (pos != pl.end() && *pos == child_idx) pl.erase(pos);
        if (pl.empty()) inv.erase(it);
    }
}

void LeafNode::rebuild_inverted() {
    inv.clear();
    std::vector<std::pair<CellId, std::uint32_t>> pairs;
    std::size_t total = 0;
    for (const auto& ch : children) total += ch->set.cells.size();
    pairs.reserve(total);
    for (std::uint32_t i = 0; i < children.size(); ++i)
        for (CellId c : children[i]->set.cells) pairs.emplace_back(c, i);
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [cell, idx] : pairs) {
        if (inv.empty() || inv.back().cell != cell) inv.push_back(PostingEntry{cell, {}});
        inv.back().datasets.push_back(idx);
    }
}

void LeafNode::refresh_rect_from_children() {
    rect = children.front()->rect();
    for (const auto& ch : children) rect = rect.united(ch->rect());
    refresh_ball();
}

IBtree::IBtree(GridConfig grid, std::uint32_t capacity) : grid_(grid), capacity_(capacity) {
    if (capacity_ < 1) throw InvalidParameterError("leaf capacity must be >= 1");
}

namespace {

Rect covering_rect(std::span<const std::unique_ptr<DatasetNode>> nodes) {
    Rect r = nodes.front()->rect();
    for (const auto& n : nodes) r = r.united(n->rect());
    return r;
}

/// Splits nodes by pivot coordinate relative to the covering rect's pivot.
/// Picks the dimension with the widest pivot spread (ties: dimension 0).
/// A one-sided partition moves the median node to the empty side.
void partition_nodes(std::vector<std::unique_ptr<DatasetNode>> nodes,
                     std::vector<std::unique_ptr<DatasetNode>>& left,
                     std::vector<std::unique_ptr<DatasetNode>>& right) {
    PivotBall ball = rect_ball(covering_rect(nodes));

    double min_x = std::numeric_limits<double>::max(), max_x = std::numeric_limits<double>::lowest();
    double min_y = min_x, max_y = max_x;
    for (const auto& n : nodes) {
        min_x = std::min(min_x, n->set.pivot.x);
        max_x = std::max(max_x, n->set.pivot.x);
        min_y = std::min(min_y, n->set.pivot.y);
        max_y = std::max(max_y, n->set.pivot.y);
    }
    const int dim = (max_y - min_y > max_x - min_x) ? 1 : 0;
    auto coord = [dim](const DatasetNode& n) { return dim == 0 ? n.set.pivot.x : n.set.pivot.y; };
    const double split = dim == 0 ? ball.pivot.x : ball.pivot.y;

    for (auto& n : nodes) {
        (coord(*n) <= split ? left : right).push_back(std::move(n));
    }

    if (left.empty() || right.empty()) {
        auto& full = left.empty() ? right : left;
        auto& hole = left.empty() ? left : right;
        std::vector<std::size_t> order(full.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return coord(*full[a]) < coord(*full[b]);
        });
        const std::size_t median = order[order.size() / 2];
        hole.push_back(std::move(full[median]));
        full.erase(full.begin() + static_cast<std::ptrdiff_t>(median));
    }
}

} // namespace

std::unique_ptr<TreeNode> IBtree::build_subtree(std::vector<std::unique_ptr<DatasetNode>> nodes,
                                                std::uint32_t capacity) {
    const Rect rect = covering_rect(nodes);
    if (nodes.size() <= capacity) {
        auto leaf = std::make_unique<LeafNode>();
        leaf->rect = rect;
        leaf->refresh_ball();
        leaf->children = std::move(nodes);
        for (auto& ch : leaf->children) ch->parent = leaf.get();
        leaf->rebuild_inverted();
        return leaf;
    }

    std::vector<std::unique_ptr<DatasetNode>> left_list, right_list;
    partition_nodes(std::move(nodes), left_list, right_list);

    auto node = std::make_unique<InternalNode>();
    node->rect = rect;
    node->refresh_ball();
    node->left = build_subtree(std::move(left_list), capacity);
    node->right = build_subtree(std::move(right_list), capacity);
    node->left->parent = node.get();
    node->right->parent = node.get();
    return node;
}

void IBtree::register_subtree(TreeNode* node) {
    if (node == nullptr) return;
    if (node->is_leaf()) {
        for (auto& ch : static_cast<LeafNode*>(node)->children) {
            auto [it, inserted] = directory_.emplace(ch->id(), ch.get());
            if (!inserted)
                throw DuplicateDatasetError("duplicate dataset id '" + ch->id() + "'");
            content_fp_ ^= hash_spatial_set(ch->set);
        }
        return;
    }
    auto* in = static_cast<InternalNode*>(node);
    register_subtree(in->left.get());
    register_subtree(in->right.get());
}

IBtree IBtree::build(std::vector<SpatialSet> sets, std::uint32_t capacity,
                     const GridConfig& grid) {
    if (sets.empty()) throw EmptyDatasetError("cannot build an index over zero datasets");

    IBtree tree(grid, capacity);
    const std::uint64_t fp = grid.fingerprint();
    std::vector<std::unique_ptr<DatasetNode>> nodes;
    nodes.reserve(sets.size());
    for (SpatialSet& s : sets) {
        if (s.grid_fp != fp)
            throw IncompatibleGridError("dataset '" + s.dataset_id +
                                        "' was rasterized on a different grid");
        nodes.push_back(std::make_unique<DatasetNode>(DatasetNode{std::move(s), nullptr}));
    }
    tree.root_ = build_subtree(std::move(nodes), capacity);
    tree.register_subtree(tree.root_.get());
    return tree;
}

const DatasetNode* IBtree::find(std::string_view id) const {
    auto it = directory_.find(std::string(id));
    return it == directory_.end() ? nullptr : it->second;
}

void IBtree::expand_upward(TreeNode* node) {
    TreeNode* cur = node;
    while (cur->parent != nullptr) {
        TreeNode* pa = cur->parent;
        Rect expanded = pa->rect.united(cur->rect);
        if (expanded == pa->rect) break;
        pa->rect = expanded;
        pa->refresh_ball();
        cur = pa;
    }
}

void IBtree::insert(SpatialSet set) {
    if (set.grid_fp != grid_.fingerprint())
        throw IncompatibleGridError("dataset '" + set.dataset_id +
                                    "' was rasterized on a different grid");
    if (directory_.contains(set.dataset_id))
        throw DuplicateDatasetError("dataset '" + set.dataset_id + "' already indexed");

    auto node = std::make_unique<DatasetNode>(DatasetNode{std::move(set), nullptr});
    DatasetNode* raw = node.get();

    if (root_ == nullptr) {
        auto leaf = std::make_unique<LeafNode>();
        leaf->rect = raw->rect();
        leaf->refresh_ball();
        node->parent = leaf.get();
        leaf->children.push_back(std::move(node));
        leaf->rebuild_inverted();
        root_ = std::move(leaf);
        directory_.emplace(raw->id(), raw);
        content_fp_ ^= hash_spatial_set(raw->set);
        ++generation_;
        return;
    }

    // Descend to the leaf with the closest pivot at each layer; ties go left.
    auto pivot_dist_sq = [](const Vec2& a, const Vec2& b) {
        double dx = a.x - b.x, dy = a.y - b.y;
        return dx * dx + dy * dy;
    };
    TreeNode* cur = root_.get();
    while (!cur->is_leaf()) {
        auto* in = static_cast<InternalNode*>(cur);
        double dl = pivot_dist_sq(in->left->pivot, raw->set.pivot);
        double dr = pivot_dist_sq(in->right->pivot, raw->set.pivot);
        cur = dr < dl ? in->right.get() : in->left.get();
    }

    auto* leaf = static_cast<LeafNode*>(cur);
    node->parent = leaf;
    leaf->children.push_back(std::move(node));
    const auto idx = static_cast<std::uint32_t>(leaf->children.size() - 1);
    for (CellId c : raw->set.cells) leaf->add_to_inverted(c, idx);
    leaf->rect = leaf->rect.united(raw->rect());
    leaf->refresh_ball();
    directory_.emplace(raw->id(), raw);
    content_fp_ ^= hash_spatial_set(raw->set);

    if (leaf->children.size() > capacity_) {
        split_leaf(leaf);
    } else {
        expand_upward(leaf);
    }
    ++generation_;
}

void IBtree::split_leaf(LeafNode* leaf) {
    std::vector<std::unique_ptr<DatasetNode>> nodes = std::move(leaf->children);
    std::vector<std::unique_ptr<DatasetNode>> left_list, right_list;
    partition_nodes(std::move(nodes), left_list, right_list);

    auto make_leaf = [](std::vector<std::unique_ptr<DatasetNode>> list) {
        auto l = std::make_unique<LeafNode>();
        l->children = std::move(list);
        for (auto& ch : l->children) ch->parent = l.get();
        l->refresh_rect_from_children();
        l->rebuild_inverted();
        return l;
    };

    auto internal = std::make_unique<InternalNode>();
    internal->left = make_leaf(std::move(left_list));
    internal->right = make_leaf(std::move(right_list));
    internal->left->parent = internal.get();
    internal->right->parent = internal.get();
    internal->rect = internal->left->rect.united(internal->right->rect);
    internal->refresh_ball();

    TreeNode* parent = leaf->parent;
    InternalNode* internal_raw = internal.get();
    internal->parent = parent;
    if (parent == nullptr) {
        root_ = std::move(internal);
        return;
    }
    auto* pa = static_cast<InternalNode*>(parent);
    if (pa->left.get() == leaf)
        pa->left = std::move(internal);
    else
        pa->right = std::move(internal);
    expand_upward(internal_raw);
}

void IBtree::update(SpatialSet set) {
    if (set.grid_fp != grid_.fingerprint())
        throw IncompatibleGridError("dataset '" + set.dataset_id +
                                    "' was rasterized on a different grid");
    auto it = directory_.find(set.dataset_id);
    if (it == directory_.end())
        throw NotFoundError("dataset '" + set.dataset_id + "' is not indexed");

    DatasetNode* node = it->second;
    LeafNode* leaf = node->parent;
    std::uint32_t idx = 0;
    while (leaf->children[idx].get() != node) ++idx;

    content_fp_ ^= hash_spatial_set(node->set);
    leaf->remove_from_inverted(node->set.cells, idx);
    node->set = std::move(set);
    content_fp_ ^= hash_spatial_set(node->set);
    for (CellId c : node->set.cells) leaf->add_to_inverted(c, idx);

    leaf->rect = leaf->rect.united(node->rect());
    leaf->refresh_ball();
    expand_upward(leaf);
    ++generation_;
}

std::size_t IBtree::leaf_count() const {
    std::size_t n = 0;
    for_each_leaf([&](const LeafNode&) { ++n; });
    return n;
}

namespace {

std::size_t subtree_depth(const TreeNode* node) {
    if (node == nullptr || node->is_leaf()) return 0;
    const auto* in = static_cast<const InternalNode*>(node);
    return 1 + std::max(subtree_depth(in->left.get()), subtree_depth(in->right.get()));
}

} // namespace

std::size_t IBtree::depth() const { return subtree_depth(root_.get()); }

std::vector<std::string> IBtree::dataset_ids_sorted() const {
    std::vector<std::string> ids;
    ids.reserve(directory_.size());
    for (const auto& [id, _] : directory_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<const LeafNode*> IBtree::collect_leaves_within(const PivotBall& probe,
                                                           double delta) const {
    std::vector<const LeafNode*> out;
    if (root_ == nullptr) return out;
    std::vector<const TreeNode*> stack{root_.get()};
    while (!stack.empty()) {
        const TreeNode* n = stack.back();
        stack.pop_back();
        if (ball_gap(n->ball(), probe) >= delta) continue;
        if (n->is_leaf()) {
            out.push_back(static_cast<const LeafNode*>(n));
            continue;
        }
        const auto* in = static_cast<const InternalNode*>(n);
        // Right first so the left child pops first: leaves come out in DFS order.
        stack.push_back(in->right.get());
        stack.push_back(in->left.get());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Snapshot format: "MSDS" magic, u16 version, grid config, u32 capacity,
// u64 generation, u64 content fingerprint, then pre-order length-prefixed node
// records. Cell lists and posting lists are delta-encoded varints.

namespace {

constexpr char kMagic[4] = {'M', 'S', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

void write_node(ByteWriter& w, const TreeNode* node) {
    ByteWriter rec;
    rec.put_u8(static_cast<std::uint8_t>(node->kind()));
    rec.put_u32(node->rect.min_col);
    rec.put_u32(node->rect.min_row);
    rec.put_u32(node->rect.max_col);
    rec.put_u32(node->rect.max_row);
    rec.put_f64(node->pivot.x);
    rec.put_f64(node->pivot.y);
    rec.put_f64(node->radius);
    if (node->is_leaf()) {
        const auto* leaf = static_cast<const LeafNode*>(node);
        rec.put_u32(static_cast<std::uint32_t>(leaf->children.size()));
        for (const auto& ch : leaf->children) {
            rec.put_string(ch->id());
            rec.put_sorted_u32s(ch->set.cells);
        }
        rec.put_u32(static_cast<std::uint32_t>(leaf->inv.size()));
        CellId prev = 0;
        for (const PostingEntry& e : leaf->inv) {
            rec.put_varint(e.cell - prev);
            prev = e.cell;
            rec.put_sorted_u32s(e.datasets);
        }
    }
    w.put_u32(static_cast<std::uint32_t>(rec.buf.size()));
    w.put_raw(rec.buf);
    if (!node->is_leaf()) {
        const auto* in = static_cast<const InternalNode*>(node);
        write_node(w, in->left.get());
        write_node(w, in->right.get());
    }
}

std::unique_ptr<TreeNode> read_node(ByteReader& r, const GridConfig& grid) {
    std::uint32_t len = r.get_u32();
    r.require(len);
    ByteReader rec(r.data.subspan(r.pos, len));
    r.pos += len;

    auto kind = rec.get_u8();
    if (kind > 1) throw FormatError("unknown node kind");
    Rect rect{rec.get_u32(), rec.get_u32(), 0, 0};
    rect.max_col = rec.get_u32();
    rect.max_row = rec.get_u32();
    Vec2 pivot{rec.get_f64(), rec.get_f64()};
    double radius = rec.get_f64();

    if (kind == static_cast<std::uint8_t>(NodeKind::Leaf)) {
        auto leaf = std::make_unique<LeafNode>();
        leaf->rect = rect;
        leaf->pivot = pivot;
        leaf->radius = radius;
        std::uint32_t n = rec.get_u32();
        if (n == 0) throw FormatError("leaf without children");
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string id = rec.get_string();
            auto cells = rec.get_sorted_u32s();
            SpatialSet s = set_from_cells(std::move(cells), grid, std::move(id));
            auto ch = std::make_unique<DatasetNode>(DatasetNode{std::move(s), leaf.get()});
            leaf->children.push_back(std::move(ch));
        }
        std::uint32_t keys = rec.get_u32();
        CellId prev = 0;
        leaf->inv.reserve(keys);
        for (std::uint32_t i = 0; i < keys; ++i) {
            prev += static_cast<CellId>(rec.get_varint());
            PostingEntry e;
            e.cell = prev;
            e.datasets = rec.get_sorted_u32s();
            for (std::uint32_t d : e.datasets)
                if (d >= n) throw FormatError("posting references missing child");
            leaf->inv.push_back(std::move(e));
        }
        if (!rec.done()) throw FormatError("trailing bytes in leaf record");
        return leaf;
    }

    if (!rec.done()) throw FormatError("trailing bytes in internal record");
    auto node = std::make_unique<InternalNode>();
    node->rect = rect;
    node->pivot = pivot;
    node->radius = radius;
    node->left = read_node(r, grid);
    node->right = read_node(r, grid);
    node->left->parent = node.get();
    node->right->parent = node.get();
    return node;
}

} // namespace

std::vector<std::uint8_t> IBtree::serialize() const {
    ByteWriter w;
    w.put_raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.put_u16(kVersion);
    w.put_f64(grid_.origin_lon);
    w.put_f64(grid_.origin_lat);
    w.put_f64(grid_.width);
    w.put_f64(grid_.height);
    w.put_u32(grid_.theta);
    w.put_u32(capacity_);
    w.put_u64(generation_);
    w.put_u64(content_fp_);
    w.put_u8(root_ == nullptr ? 0 : 1);
    if (root_ != nullptr) write_node(w, root_.get());
    return std::move(w.buf);
}

IBtree IBtree::deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.require(4);
    if (std::memcmp(r.data.data(), kMagic, 4) != 0) throw FormatError("bad index magic");
    r.pos += 4;
    if (r.get_u16() != kVersion) throw FormatError("unsupported index format version");

    double x0 = r.get_f64();
    double y0 = r.get_f64();
    double w = r.get_f64();
    double h = r.get_f64();
    std::uint32_t theta = r.get_u32();
    GridConfig grid(x0, y0, w, h, theta);

    IBtree tree(grid, r.get_u32());
    tree.generation_ = r.get_u64();
    std::uint64_t content_fp = r.get_u64();
    if (r.get_u8() != 0) {
        tree.root_ = read_node(r, grid);
        tree.register_subtree(tree.root_.get());
        if (tree.content_fp_ != content_fp) throw FormatError("content fingerprint mismatch");
    } else if (content_fp != 0) {
        throw FormatError("content fingerprint mismatch");
    }
    if (!r.done()) throw FormatError("trailing bytes after index snapshot");
    return tree;
}

} // namespace msds
