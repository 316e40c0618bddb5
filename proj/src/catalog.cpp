#include "unispace/core/catalog.hpp"

#include <array>
#include <set>

#include "unispace/error.hpp"

namespace uni {
namespace {

constexpr std::array<ToolSpec, 14> kTaskTools{{
    {"system", "System", "navigation", "go to the task management workplace of the system site"},
    {"site", "Site", "navigation", "go to the task management workplace of the current site"},
    {"what_is_this", "What is this?", "help", "describe the purpose of a sign"},
    {"find", "Find", "search", "search for resources"},
    {"select", "Select", "selection", "select a sign"},
    {"undo", "UnDo", "history", "cancel the last operation"},
    {"redo", "ReDo", "history", "restore the cancelled operation"},
    {"repeat", "Repeat", "history", "repeat the last operation"},
    {"save", "Save", "data", "save the object"},
    {"command", "Command", "input", "run a text command line"},
    {"create_task", "Create task", "tasks", "create a new task"},
    {"complete_task", "Complete task", "tasks", "complete a task"},
    {"exit", "Exit", "navigation", "leave the current space or subtask"},
    {"enter", "Enter", "input", "submit the pending input"},
}};

constexpr std::array<ToolSpec, 6> kSelectionTools{{
    {"properties", "Properties", "object", "show and change the properties of a sign"},
    {"structure", "Structure", "object", "show the structure of an object"},
    {"move", "Move", "object", "cut the selection to the clipboard"},
    {"copy", "Copy", "object", "copy the selection to the clipboard"},
    {"insert", "Insert", "object", "insert the clipboard into the current zone"},
    {"delete", "Delete", "object", "move the selection to the trash container"},
}};

constexpr std::array<ToolSpec, 7> kDeskTools{{
    {"activate", "Open portal", "desk", "move through a portal"},
    {"switch_task", "Switch task", "desk", "focus another task"},
    {"spawn_subtask", "Subtask", "desk", "start a subtask with parameters"},
    {"return", "Return", "desk", "return from a subtask"},
    {"cancel_task", "Cancel task", "desk", "refuse a task that is still searching"},
    {"journal", "Journal", "desk", "list task journal entries"},
    {"tasks", "Tasks", "desk", "list tasks and their states"},
}};

constexpr std::array<ToolSpec, 10> kSearchTools{{
    {"find", "Find", "search", "search for resources"},
    {"map", "Map", "search", "show the environment map"},
    {"favorites", "Favorites", "search", "list favorite portals"},
    {"history", "History", "search", "list recently activated portals"},
    {"mark_favorite", "Mark favorite", "search", "add a portal to favorites"},
    {"portal_mk", "Make portal", "portals", "create a portal to a place"},
    {"portal_ls", "Portals", "portals", "list portals"},
    {"portal_export", "Export portal", "portals", "produce a portable portal record"},
    {"portal_import", "Import portal", "portals", "accept a portable portal record"},
    {"activate", "Open portal", "desk", "move through a portal"},
}};

constexpr std::array<ToolSpec, 17> kDataTools{{
    {"listing", "Listing", "data", "list a zone"},
    {"create_section", "New section", "data", "create a storage section"},
    {"create_container", "New container", "data", "create a container"},
    {"create_object", "Create object", "data", "store a new data object"},
    {"obj_get", "Get object", "data", "read an object"},
    {"obj_versions", "Versions", "data", "list object versions"},
    {"restore_version", "Restore version", "data", "restore an object version"},
    {"open", "Move object", "desk", "open an object on the desktop for editing"},
    {"view", "Move for view", "desk", "open an object on the desktop for viewing"},
    {"edit", "Edit", "desk", "change a part of an open object"},
    {"close", "Close", "desk", "close a desktop handle"},
    {"save", "Save", "data", "save the open object"},
    {"fetch_part", "Fetch part", "data", "transfer a byte range of a part"},
    {"trash_list", "Trash", "data", "list the trash container"},
    {"restore", "Restore", "data", "return an object from the trash"},
    {"undo", "UnDo", "history", "cancel the last operation"},
    {"redo", "ReDo", "history", "restore the cancelled operation"},
}};

constexpr std::array<ToolSpec, 4> kInstallTools{{
    {"install_site", "Install site", "sites", "install a site from a template"},
    {"uninstall_site", "Remove site", "sites", "remove a site and its storage"},
    {"templates", "Templates", "sites", "list site templates"},
    {"lint", "Check structure", "sites", "check complexity limits"},
}};

constexpr std::array<ToolSpec, 3> kDeviceTools{{
    {"mount", "Mount", "devices", "attach a device or cloud partition"},
    {"unmount", "Unmount", "devices", "detach a partition"},
    {"partitions", "Partitions", "devices", "list partitions"},
}};

constexpr std::array<ToolSpec, 8> kSettingsTools{{
    {"grant", "Grant", "access", "give an agent rights on a storage"},
    {"revoke", "Revoke", "access", "withdraw a grant"},
    {"policy", "Policy", "access", "list grants"},
    {"federate", "Federate", "peers", "exchange cards with another domain"},
    {"disconnect", "Disconnect", "peers", "drop a federation link"},
    {"links", "Links", "peers", "list federation links"},
    {"set_setting", "Setting", "settings", "change a setting"},
    {"snapshot", "Snapshot", "settings", "write a domain archive"},
}};

constexpr std::array<ToolSpec, 1> kPeerTools{{
    {"peer_sites", "Peer sites", "peers", "portal records offered to a peer"},
}};

template <std::size_t N>
std::span<const ToolSpec> view(const std::array<ToolSpec, N>& a) {
  return {a.data(), a.size()};
}

ToolTemplate tool(std::string key, std::string name, std::string purpose) {
  return ToolTemplate{std::move(key), std::move(name), "document", std::move(purpose), "doc"};
}

}  // namespace

std::span<const ToolSpec> task_tools() { return view(kTaskTools); }
std::span<const ToolSpec> selection_tools() { return view(kSelectionTools); }
std::span<const ToolSpec> desk_tools() { return view(kDeskTools); }
std::span<const ToolSpec> search_tools() { return view(kSearchTools); }
std::span<const ToolSpec> data_tools() { return view(kDataTools); }
std::span<const ToolSpec> install_tools() { return view(kInstallTools); }
std::span<const ToolSpec> device_tools() { return view(kDeviceTools); }
std::span<const ToolSpec> settings_tools() { return view(kSettingsTools); }
std::span<const ToolSpec> peer_tools() { return view(kPeerTools); }

const ToolSpec* find_system_tool(std::string_view key) {
  for (auto list : {task_tools(), selection_tools(), desk_tools(), search_tools(), data_tools(),
                    install_tools(), device_tools(), settings_tools(), peer_tools()})
    for (const auto& t : list)
      if (t.key == key) return &t;
  return nullptr;
}

bool is_system_tool(std::string_view key) { return find_system_tool(key) != nullptr; }

SiteTemplate parse_template(const Json& doc) {
  auto bad = [](const std::string& where) { fail(Errc::InvalidTemplate, where); };
  auto text = [&](const Json& obj, const char* key, const std::string& where,
                  bool required) -> std::string {
    if (!obj.contains(key)) {
      if (required) bad(where + "." + key + " missing");
      return {};
    }
    if (!obj[key].is_string()) bad(where + "." + key + " not a string");
    return obj[key].get<std::string>();
  };
  if (!doc.is_object()) bad("template is not an object");
  SiteTemplate t;
  t.name = text(doc, "name", "template", true);
  if (t.name.empty()) bad("template.name empty");
  t.purpose = text(doc, "purpose", "template", false);
  try {
    if (doc.contains("kind")) t.kind = site_kind_from(text(doc, "kind", "template", true));
  } catch (const Error&) {
    bad("template.kind");
  }
  if (t.kind == SiteKind::System) bad("template.kind System is reserved");
  if (doc.contains("sections")) {
    if (!doc["sections"].is_array()) bad("template.sections");
    for (const auto& s : doc["sections"]) {
      if (!s.is_string()) bad("template.sections[]");
      t.sections.push_back(s.get<std::string>());
    }
  }
  if (doc.contains("workplaces")) {
    if (!doc["workplaces"].is_array()) bad("template.workplaces");
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc["workplaces"].size(); ++i) {
      const auto& w = doc["workplaces"][i];
      auto where = "workplaces[" + std::to_string(i) + "]";
      if (!w.is_object()) bad(where);
      WorkplaceTemplate wt;
      wt.name = text(w, "name", where, true);
      if (wt.name.empty() || wt.name == "TaskMgmt" || wt.name == "DataMgmt")
        bad(where + ".name reserved or empty");
      if (!names.insert(wt.name).second) bad(where + ".name duplicate");
      if (w.contains("scheme")) {
        try {
          wt.scheme = scheme_from(text(w, "scheme", where, true));
        } catch (const Error&) {
          bad(where + ".scheme");
        }
      }
      std::set<std::string> keys;
      if (w.contains("toolbars")) {
        if (!w["toolbars"].is_array()) bad(where + ".toolbars");
        for (std::size_t b = 0; b < w["toolbars"].size(); ++b) {
          const auto& tb = w["toolbars"][b];
          auto bwhere = where + ".toolbars[" + std::to_string(b) + "]";
          if (!tb.is_object()) bad(bwhere);
          ToolbarTemplate bt;
          bt.name = text(tb, "name", bwhere, true);
          if (tb.contains("tools")) {
            if (!tb["tools"].is_array()) bad(bwhere + ".tools");
            for (std::size_t k = 0; k < tb["tools"].size(); ++k) {
              const auto& tj = tb["tools"][k];
              auto twhere = bwhere + ".tools[" + std::to_string(k) + "]";
              if (!tj.is_object()) bad(twhere);
              ToolTemplate tt;
              tt.key = text(tj, "key", twhere, true);
              if (tt.key.empty()) bad(twhere + ".key empty");
              if (is_system_tool(tt.key)) bad(twhere + ".key shadows a system tool");
              if (!keys.insert(tt.key).second) bad(twhere + ".key duplicate in workplace");
              tt.name = text(tj, "name", twhere, false);
              if (tt.name.empty()) tt.name = tt.key;
              tt.group = text(tj, "group", twhere, false);
              tt.purpose = text(tj, "purpose", twhere, false);
              tt.agent = text(tj, "agent", twhere, false);
              bt.tools.push_back(std::move(tt));
            }
          }
          wt.toolbars.push_back(std::move(bt));
        }
      }
      t.workplaces.push_back(std::move(wt));
    }
  }
  return t;
}

Json template_to_json(const SiteTemplate& t) {
  Json w = Json::array();
  for (const auto& wt : t.workplaces) {
    Json bars = Json::array();
    for (const auto& bt : wt.toolbars) {
      Json tools = Json::array();
      for (const auto& tt : bt.tools)
        tools.push_back({{"key", tt.key},
                         {"name", tt.name},
                         {"group", tt.group},
                         {"purpose", tt.purpose},
                         {"agent", tt.agent}});
      bars.push_back({{"name", bt.name}, {"tools", tools}});
    }
    w.push_back({{"name", wt.name}, {"scheme", to_string(wt.scheme)}, {"toolbars", bars}});
  }
  return {{"name", t.name},
          {"kind", to_string(t.kind)},
          {"purpose", t.purpose},
          {"sections", t.sections},
          {"workplaces", w}};
}

std::vector<std::string> builtin_template_names() {
  return {"empty", "document-editor", "data-site"};
}

SiteTemplate builtin_template(std::string_view name) {
  SiteTemplate t;
  if (name == "empty") {
    t.name = "empty";
    t.purpose = "bare site";
    return t;
  }
  if (name == "data-site") {
    t.name = "data-site";
    t.kind = SiteKind::DataSite;
    t.purpose = "store data objects";
    t.sections = {"Inbox", "Archive"};
    return t;
  }
  if (name == "document-editor") {
    t.name = "document-editor";
    t.purpose = "create and edit documents";
    t.sections = {"Documents"};
    auto wp = [](std::string wname, std::vector<ToolTemplate> tools) {
      return WorkplaceTemplate{std::move(wname), Scheme::Technological,
                               {ToolbarTemplate{"Tools", std::move(tools)}}};
    };
    t.workplaces = {
        wp("Document", {tool("doc.title", "Title", "set the document title"),
                        tool("doc.print", "Print", "produce a printable rendition")}),
        wp("Text", {tool("text.type", "Type", "enter text"),
                    tool("text.format", "Format", "format text")}),
        wp("Table", {tool("table.insert", "Insert table", "insert a table")}),
        wp("Figure", {tool("figure.insert", "Insert figure", "insert a picture")}),
        wp("Formula", {tool("formula.insert", "Insert formula", "insert a formula")}),
        wp("Reference", {tool("ref.insert", "Insert link", "insert a link")}),
    };
    return t;
  }
  fail(Errc::InvalidTemplate, "unknown template " + std::string(name));
}

}  // namespace uni
